// Batch experiment runner: a JSON sweep config expands into
// (algorithm, K, theta_hat) sweep points x replicates, each replicate runs
// one chain with a seed derived from (master_seed, sweep index, replicate),
// and the per-row diagnostics land in a CSV. Configs are validated strictly:
// unknown keys are rejected with their field path.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dimcmc/gaussian.hpp"
#include "dimcmc/ising.hpp"
#include "dimcmc/samplers.hpp"

#include "json.hpp"

namespace dimcmc {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what) {}
};

struct GaussianSpec {
  double alpha = 1.0;
  double beta = 1.0;
  Eigen::VectorXd data;
};

struct IsingGenerateSpec {
  double theta_coupling = 0.0;
  double theta_field = 0.0;
  std::uint64_t seed = 0;
};

struct IsingSpec {
  int width = 0;
  int height = 0;
  std::string data_file;                     // exactly one of data_file /
  std::optional<IsingGenerateSpec> generate; // generate is set
};

struct ProposalSpec {
  enum class Kind { IndependentPosterior, RandomWalk };
  Kind kind = Kind::RandomWalk;
  double width = 0.0;
};

// theta_hat sweep values: numeric constants for the Gaussian model, or the
// pseudo-likelihood point estimate of the observed lattice for Ising.
struct ThetaHatSpec {
  bool pseudolikelihood = false;
  std::vector<double> values;
};

struct SamplerSweepSpec {
  std::vector<Algorithm> algorithms;
  std::vector<int> bridge_levels{0};
  ThetaHatSpec theta_hat;
  ProposalSpec proposal;
  std::int64_t iterations = 0;
  std::int64_t burn_in = 0;
  int n_replicates = 1;
  std::optional<Eigen::VectorXd> initial_theta;
};

struct OutputSpec {
  std::string csv_path;
  bool per_replicate_detail = false;
};

struct ExperimentConfig {
  std::uint64_t master_seed = 0;
  std::variant<GaussianSpec, IsingSpec> model;
  SamplerSweepSpec sampler;
  OutputSpec output;
  std::string base_dir;  // directory relative file references resolve against
};

// One expanded sweep point. K collapses to 0 for algorithms without bridging
// and theta_hat is dropped for algorithms that do not use it, so exchange
// appears once rather than once per (K, theta_hat) combination.
struct SweepPoint {
  Algorithm algorithm = Algorithm::Exchange;
  int bridge_levels = 0;
  std::optional<ParamPoint> theta_hat;
};

std::vector<SweepPoint> expand_sweep(const SamplerSweepSpec& sweep,
                                     const std::optional<ParamPoint>& ising_theta_hat);

struct SweepRow {
  std::string algorithm;
  int bridge_levels = 0;
  std::optional<ParamPoint> theta_hat;
  std::optional<double> proposal_width;
  int replicate = 0;
  double acceptance_rate = 0.0;
  double ess = 0.0;
  std::uint64_t gibbs_updates = 0;
  std::uint64_t exact_samples = 0;
  double wall_time_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string error;  // empty on success; failed rows keep their seed and zeros
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

// Strict parse + validation. base_dir resolves relative data_file paths.
ExperimentConfig parse_experiment_config(const nlohmann::json& j,
                                         const std::string& base_dir);
ExperimentConfig load_experiment_config(const std::string& path);

// Applies one "dotted.path=value" override to a raw config document; the
// value is parsed as JSON when possible and as a string otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);

// Runs every sweep point x replicate. Rows are deterministic in value and
// order for a fixed config (wall_time excepted); failed replicates record
// the error and the run continues. jobs > 1 runs chains concurrently.
SweepResult run_experiment(const ExperimentConfig& config, int jobs = 1);

void emit_csv(const SweepResult& result, const std::string& path);
void emit_csv(const SweepResult& result, std::ostream& os);

// One CFTP draw serialized in the lattice text format.
void generate_ising_data(int width, int height, double theta_coupling,
                         double theta_field, std::uint64_t seed,
                         const std::string& path);

}  // namespace dimcmc
