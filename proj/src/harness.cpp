#include "dimcmc/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "dimcmc/diagnostics.hpp"

namespace dimcmc {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path, what);
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
}

void reject_unknown_keys(const json& obj, const std::string& path,
                         std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed)
      if (it.key() == key) known = true;
    if (!known) fail(path + "." + it.key(), "unknown key");
  }
}

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const json& require(const json& obj, const std::string& path, const char* key) {
  const json* p = find(obj, key);
  if (p == nullptr) fail(path, std::string("missing required key '") + key + "'");
  return *p;
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

std::int64_t as_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<std::int64_t>();
}

std::uint64_t as_seed(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  fail(path, "expected a non-negative integer seed");
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected a boolean");
  return j.get<bool>();
}

GaussianSpec parse_gaussian(const json& j, const std::string& path) {
  require_object(j, path);
  reject_unknown_keys(j, path, {"alpha", "beta", "data"});
  GaussianSpec spec;
  spec.alpha = as_number(require(j, path, "alpha"), path + ".alpha");
  spec.beta = as_number(require(j, path, "beta"), path + ".beta");
  if (!(spec.alpha > 0.0)) fail(path + ".alpha", "must be positive");
  if (!(spec.beta > 0.0)) fail(path + ".beta", "must be positive");
  const json& data = require(j, path, "data");
  if (!data.is_array() || data.empty()) fail(path + ".data", "expected a non-empty array");
  spec.data.resize(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    spec.data[static_cast<Eigen::Index>(i)] =
        as_number(data[i], path + ".data[" + std::to_string(i) + "]");
    if (!std::isfinite(spec.data[static_cast<Eigen::Index>(i)]))
      fail(path + ".data[" + std::to_string(i) + "]", "must be finite");
  }
  return spec;
}

IsingSpec parse_ising(const json& j, const std::string& path) {
  require_object(j, path);
  reject_unknown_keys(j, path, {"width", "height", "data_file", "generate"});
  IsingSpec spec;
  spec.width = static_cast<int>(as_integer(require(j, path, "width"), path + ".width"));
  spec.height = static_cast<int>(as_integer(require(j, path, "height"), path + ".height"));
  if (spec.width < 1) fail(path + ".width", "must be >= 1");
  if (spec.height < 1) fail(path + ".height", "must be >= 1");
  const json* file = find(j, "data_file");
  const json* gen = find(j, "generate");
  if ((file != nullptr) == (gen != nullptr))
    fail(path, "need exactly one of 'data_file' or 'generate'");
  if (file != nullptr) {
    spec.data_file = as_string(*file, path + ".data_file");
  } else {
    const std::string gpath = path + ".generate";
    require_object(*gen, gpath);
    reject_unknown_keys(*gen, gpath, {"theta_J", "theta_h", "seed"});
    IsingGenerateSpec g;
    g.theta_coupling = as_number(require(*gen, gpath, "theta_J"), gpath + ".theta_J");
    g.theta_field = as_number(require(*gen, gpath, "theta_h"), gpath + ".theta_h");
    g.seed = as_seed(require(*gen, gpath, "seed"), gpath + ".seed");
    if (g.theta_coupling < 0.0) fail(gpath + ".theta_J", "must be >= 0 for exact sampling");
    spec.generate = g;
  }
  return spec;
}

std::vector<Algorithm> parse_algorithms(const json& j, const std::string& path) {
  std::vector<Algorithm> out;
  auto parse_one = [&](const json& v, const std::string& p) {
    try {
      out.push_back(parse_algorithm(as_string(v, p)));
    } catch (const std::invalid_argument& e) {
      fail(p, e.what());
    }
  };
  if (j.is_array()) {
    if (j.empty()) fail(path, "expected at least one algorithm");
    for (std::size_t i = 0; i < j.size(); ++i)
      parse_one(j[i], path + "[" + std::to_string(i) + "]");
  } else {
    parse_one(j, path);
  }
  return out;
}

std::vector<int> parse_levels(const json& j, const std::string& path) {
  std::vector<int> out;
  auto parse_one = [&](const json& v, const std::string& p) {
    const std::int64_t k = as_integer(v, p);
    if (k < 0) fail(p, "bridging levels must be >= 0");
    out.push_back(static_cast<int>(k));
  };
  if (j.is_array()) {
    if (j.empty()) fail(path, "expected at least one K value");
    for (std::size_t i = 0; i < j.size(); ++i)
      parse_one(j[i], path + "[" + std::to_string(i) + "]");
  } else {
    parse_one(j, path);
  }
  return out;
}

ThetaHatSpec parse_theta_hat(const json& j, const std::string& path) {
  ThetaHatSpec spec;
  if (j.is_string()) {
    if (as_string(j, path) != "pseudolikelihood")
      fail(path, "expected a number, an array of numbers, or \"pseudolikelihood\"");
    spec.pseudolikelihood = true;
    return spec;
  }
  auto parse_one = [&](const json& v, const std::string& p) {
    const double x = as_number(v, p);
    if (!(x > 0.0)) fail(p, "theta_hat must be positive");
    spec.values.push_back(x);
  };
  if (j.is_array()) {
    if (j.empty()) fail(path, "expected at least one theta_hat value");
    for (std::size_t i = 0; i < j.size(); ++i)
      parse_one(j[i], path + "[" + std::to_string(i) + "]");
  } else {
    parse_one(j, path);
  }
  return spec;
}

ProposalSpec parse_proposal(const json& j, const std::string& path) {
  require_object(j, path);
  reject_unknown_keys(j, path, {"kind", "width"});
  ProposalSpec spec;
  const std::string kind = as_string(require(j, path, "kind"), path + ".kind");
  if (kind == "independent-posterior") {
    spec.kind = ProposalSpec::Kind::IndependentPosterior;
    if (find(j, "width") != nullptr)
      fail(path + ".width", "independent-posterior takes no width");
  } else if (kind == "random-walk-gaussian") {
    spec.kind = ProposalSpec::Kind::RandomWalk;
    spec.width = as_number(require(j, path, "width"), path + ".width");
    if (!(spec.width > 0.0)) fail(path + ".width", "must be positive");
  } else {
    fail(path + ".kind",
         "expected \"independent-posterior\" or \"random-walk-gaussian\"");
  }
  return spec;
}

SamplerSweepSpec parse_sampler(const json& j, const std::string& path, bool gaussian) {
  require_object(j, path);
  reject_unknown_keys(j, path,
                      {"algorithm", "K", "theta_hat", "proposal", "iterations",
                       "burn_in", "n_replicates", "initial_theta"});
  SamplerSweepSpec spec;
  spec.algorithms = parse_algorithms(require(j, path, "algorithm"), path + ".algorithm");
  if (const json* k = find(j, "K")) spec.bridge_levels = parse_levels(*k, path + ".K");
  if (const json* th = find(j, "theta_hat"))
    spec.theta_hat = parse_theta_hat(*th, path + ".theta_hat");
  spec.proposal = parse_proposal(require(j, path, "proposal"), path + ".proposal");
  spec.iterations = as_integer(require(j, path, "iterations"), path + ".iterations");
  if (spec.iterations < 1) fail(path + ".iterations", "must be >= 1");
  if (const json* b = find(j, "burn_in")) {
    spec.burn_in = as_integer(*b, path + ".burn_in");
    if (spec.burn_in < 0) fail(path + ".burn_in", "must be >= 0");
  }
  if (spec.iterations - spec.burn_in < 10)
    fail(path + ".burn_in", "need at least 10 post-burn-in iterations");
  if (const json* r = find(j, "n_replicates")) {
    const std::int64_t n = as_integer(*r, path + ".n_replicates");
    if (n < 1) fail(path + ".n_replicates", "must be >= 1");
    spec.n_replicates = static_cast<int>(n);
  }
  if (const json* init = find(j, "initial_theta")) {
    if (!init->is_array() || init->empty())
      fail(path + ".initial_theta", "expected a non-empty array");
    Eigen::VectorXd theta(static_cast<Eigen::Index>(init->size()));
    for (std::size_t i = 0; i < init->size(); ++i)
      theta[static_cast<Eigen::Index>(i)] =
          as_number((*init)[i], path + ".initial_theta[" + std::to_string(i) + "]");
    spec.initial_theta = theta;
  }

  const bool wants_hat = [&] {
    for (Algorithm a : spec.algorithms)
      if (a == Algorithm::Savm || a == Algorithm::Mavm) return true;
    return false;
  }();
  if (gaussian) {
    if (spec.theta_hat.pseudolikelihood)
      fail(path + ".theta_hat", "pseudolikelihood theta_hat is for the ising model");
    if (wants_hat && spec.theta_hat.values.empty())
      fail(path + ".theta_hat", "savm/mavm need theta_hat values");
  } else {
    if (!spec.theta_hat.values.empty())
      fail(path + ".theta_hat", "ising theta_hat is the pseudolikelihood estimate; omit or use \"pseudolikelihood\"");
    if (wants_hat) spec.theta_hat.pseudolikelihood = true;
    for (Algorithm a : spec.algorithms)
      if (a == Algorithm::ExactZMh)
        fail(path + ".algorithm", "exact-z-mh needs the gaussian model's normalizer");
    if (spec.proposal.kind == ProposalSpec::Kind::IndependentPosterior)
      fail(path + ".proposal.kind", "independent-posterior is gaussian-only");
  }
  return spec;
}

OutputSpec parse_output(const json& j, const std::string& path) {
  require_object(j, path);
  reject_unknown_keys(j, path, {"csv", "per_replicate_detail"});
  OutputSpec spec;
  spec.csv_path = as_string(require(j, path, "csv"), path + ".csv");
  if (const json* d = find(j, "per_replicate_detail"))
    spec.per_replicate_detail = as_bool(*d, path + ".per_replicate_detail");
  return spec;
}

std::string resolve_path(const std::string& base_dir, const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (std::filesystem::path(base_dir) / p).string();
}

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string format_theta(const ParamPoint& theta) {
  std::string out;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (i > 0) out += ';';
    out += format_real(theta[i]);
  }
  return out;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string detail_path(const std::string& csv_path, std::size_t row_index) {
  std::string stem = csv_path;
  if (stem.size() > 4 && stem.substr(stem.size() - 4) == ".csv")
    stem.resize(stem.size() - 4);
  return stem + "_trace_" + std::to_string(row_index) + ".csv";
}

void write_detail(const std::string& path, const ChainTrace& trace) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open trace file " + path);
  os << "step";
  for (Eigen::Index d = 0; d < trace.theta_samples.cols(); ++d) os << ",theta_" << d;
  os << ",accepted\n";
  for (Eigen::Index t = 0; t < trace.theta_samples.rows(); ++t) {
    os << t;
    for (Eigen::Index d = 0; d < trace.theta_samples.cols(); ++d)
      os << ',' << format_real(trace.theta_samples(t, d));
    os << ',' << int(trace.accept_flags[static_cast<std::size_t>(t)]) << '\n';
  }
}

// Post-burn-in acceptance and the smallest per-component ESS.
void fill_diagnostics(const ChainTrace& trace, std::int64_t burn_in, SweepRow& row) {
  const Eigen::Index total = trace.theta_samples.rows();
  const Eigen::Index post = total - burn_in;
  double accepted = 0.0;
  for (Eigen::Index t = burn_in; t < total; ++t)
    accepted += trace.accept_flags[static_cast<std::size_t>(t)];
  row.acceptance_rate = accepted / static_cast<double>(post);

  double min_ess = std::numeric_limits<double>::infinity();
  for (Eigen::Index d = 0; d < trace.theta_samples.cols(); ++d) {
    const Eigen::VectorXd series = trace.theta_samples.col(d).tail(post);
    min_ess = std::min(min_ess, effective_sample_size(series).ess);
  }
  row.ess = min_ess;
  row.gibbs_updates = trace.counters.gibbs_updates;
  row.exact_samples = trace.counters.exact_samples_drawn;
}

struct RowTask {
  SweepPoint point;
  std::size_t sweep_index = 0;
  int replicate = 0;
};

template <Model M>
void run_rows(const M& model, const ExperimentConfig& config, const Proposal& proposal,
              const ParamPoint& initial_theta,
              const std::vector<SweepPoint>& points, SweepResult& result, int jobs) {
  const SamplerSweepSpec& sweep = config.sampler;

  std::vector<RowTask> tasks;
  for (std::size_t s = 0; s < points.size(); ++s)
    for (int r = 0; r < sweep.n_replicates; ++r)
      tasks.push_back(RowTask{points[s], s, r});
  result.rows.resize(tasks.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const RowTask& task = tasks[i];

      SweepRow& row = result.rows[i];
      row.algorithm = algorithm_name(task.point.algorithm);
      row.bridge_levels = task.point.bridge_levels;
      row.theta_hat = task.point.theta_hat;
      if (proposal.kind() == Proposal::Kind::RandomWalk)
        row.proposal_width = proposal.width();
      row.replicate = task.replicate;
      row.seed = derive_seed(derive_seed(config.master_seed, task.sweep_index),
                             static_cast<std::uint64_t>(task.replicate));

      SamplerConfig sc;
      sc.algorithm = task.point.algorithm;
      sc.bridge_levels = task.point.bridge_levels;
      sc.theta_hat = task.point.theta_hat;
      sc.proposal = proposal;
      sc.iterations = sweep.iterations;
      sc.initial_theta = initial_theta;
      sc.seed = row.seed;

      const auto start = std::chrono::steady_clock::now();
      try {
        const ChainTrace trace = run_chain(model, sc);
        fill_diagnostics(trace, sweep.burn_in, row);
        if (config.output.per_replicate_detail)
          write_detail(detail_path(config.output.csv_path, i), trace);
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      row.wall_time_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  };

  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
}

IsingLattice obtain_ising_data(const IsingSpec& spec, const std::string& base_dir) {
  if (spec.generate) {
    Rng rng(spec.generate->seed);
    return cftp_exact_sample(spec.width, spec.height,
                             IsingParams{spec.generate->theta_coupling,
                                         spec.generate->theta_field},
                             rng);
  }
  IsingLattice lattice = read_lattice_file(resolve_path(base_dir, spec.data_file));
  if (lattice.width != spec.width || lattice.height != spec.height)
    throw ConfigError("model.ising.data_file",
                      "lattice dimensions do not match width/height");
  return lattice;
}

ParamPoint clamp_to_prior_box(const IsingParams& p) {
  ParamPoint theta(2);
  theta[0] = std::min(0.95, std::max(0.05, p.coupling));
  theta[1] = std::min(0.95, std::max(-0.95, p.field));
  return theta;
}

}  // namespace

std::vector<SweepPoint> expand_sweep(const SamplerSweepSpec& sweep,
                                     const std::optional<ParamPoint>& ising_theta_hat) {
  std::vector<SweepPoint> points;
  for (Algorithm a : sweep.algorithms) {
    const bool uses_k = a == Algorithm::Mavm || a == Algorithm::ExchangeBridged;
    const bool uses_hat = a == Algorithm::Savm || a == Algorithm::Mavm;
    const std::vector<int> levels = uses_k ? sweep.bridge_levels : std::vector<int>{0};

    std::vector<std::optional<ParamPoint>> hats;
    if (!uses_hat) {
      hats.push_back(std::nullopt);
    } else if (sweep.theta_hat.pseudolikelihood) {
      if (!ising_theta_hat)
        throw std::invalid_argument("expand_sweep: pseudolikelihood theta_hat not supplied");
      hats.push_back(*ising_theta_hat);
    } else {
      for (double v : sweep.theta_hat.values) {
        ParamPoint hat(1);
        hat[0] = v;
        hats.push_back(hat);
      }
    }

    for (int k : levels)
      for (const auto& hat : hats) points.push_back(SweepPoint{a, k, hat});
  }
  return points;
}

ExperimentConfig parse_experiment_config(const nlohmann::json& j,
                                         const std::string& base_dir) {
  require_object(j, "config");
  reject_unknown_keys(j, "config", {"master_seed", "model", "sampler", "output"});

  ExperimentConfig config;
  config.base_dir = base_dir;
  config.master_seed = as_seed(require(j, "config", "master_seed"), "master_seed");

  const json& model = require(j, "config", "model");
  require_object(model, "model");
  reject_unknown_keys(model, "model", {"gaussian", "ising"});
  const json* gaussian = find(model, "gaussian");
  const json* ising = find(model, "ising");
  if ((gaussian != nullptr) == (ising != nullptr))
    fail("model", "need exactly one of 'gaussian' or 'ising'");
  if (gaussian != nullptr)
    config.model = parse_gaussian(*gaussian, "model.gaussian");
  else
    config.model = parse_ising(*ising, "model.ising");

  config.sampler = parse_sampler(require(j, "config", "sampler"), "sampler",
                                 gaussian != nullptr);
  config.output = parse_output(require(j, "config", "output"), "output");

  if (const auto& init = config.sampler.initial_theta) {
    const Eigen::Index want = gaussian != nullptr ? 1 : 2;
    if (init->size() != want)
      fail("sampler.initial_theta", "expected dimension " + std::to_string(want));
  }
  return config;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(path, "cannot open config file");
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path, e.what());
  }
  return parse_experiment_config(j, std::filesystem::path(path).parent_path().string());
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError(assignment, "override must look like dotted.path=value");
  const std::string dotted = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;  // plain string
  }

  json* node = &j;
  std::size_t begin = 0;
  std::vector<std::string> keys;
  while (begin <= dotted.size()) {
    const std::size_t dot = dotted.find('.', begin);
    const std::string key =
        dotted.substr(begin, dot == std::string::npos ? std::string::npos : dot - begin);
    if (key.empty()) throw ConfigError(assignment, "empty key in dotted path");
    keys.push_back(key);
    if (dot == std::string::npos) break;
    begin = dot + 1;
  }
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    if (!node->is_object()) throw ConfigError(dotted, "path walks through a non-object");
    node = &(*node)[keys[i]];
  }
  if (!node->is_object()) throw ConfigError(dotted, "path walks through a non-object");
  (*node)[keys.back()] = value;
}

SweepResult run_experiment(const ExperimentConfig& config, int jobs) {
  SweepResult result;

  if (std::holds_alternative<GaussianSpec>(config.model)) {
    const GaussianSpec& spec = std::get<GaussianSpec>(config.model);
    const GaussianPrecisionModel model(spec.alpha, spec.beta, spec.data);

    const Proposal proposal =
        config.sampler.proposal.kind == ProposalSpec::Kind::IndependentPosterior
            ? Proposal::independent_posterior(model.posterior_params())
            : Proposal::random_walk(config.sampler.proposal.width);

    ParamPoint initial(1);
    if (config.sampler.initial_theta) {
      initial = *config.sampler.initial_theta;
    } else {
      const GammaParams post = model.posterior_params();
      initial[0] = post.shape / post.rate;  // posterior mean
    }

    const auto points = expand_sweep(config.sampler, std::nullopt);
    run_rows(model, config, proposal, initial, points, result, jobs);
    return result;
  }

  const IsingSpec& spec = std::get<IsingSpec>(config.model);
  const IsingPosteriorModel model(obtain_ising_data(spec, config.base_dir));
  const Proposal proposal = Proposal::random_walk(config.sampler.proposal.width);

  const IsingParams mple = pseudolikelihood_estimate(model.data());
  const ParamPoint initial = config.sampler.initial_theta
                                 ? *config.sampler.initial_theta
                                 : clamp_to_prior_box(mple);

  const auto points = expand_sweep(config.sampler, to_param_point(mple));
  run_rows(model, config, proposal, initial, points, result, jobs);
  return result;
}

void emit_csv(const SweepResult& result, std::ostream& os) {
  os << "algorithm,K,theta_hat,proposal_width,replicate,acceptance_rate,ess,"
        "gibbs_updates,exact_samples,wall_time_seconds,seed,error\n";
  for (const SweepRow& row : result.rows) {
    os << csv_escape(row.algorithm) << ',' << row.bridge_levels << ','
       << (row.theta_hat ? format_theta(*row.theta_hat) : "") << ','
       << (row.proposal_width ? format_real(*row.proposal_width) : "") << ','
       << row.replicate << ',' << format_real(row.acceptance_rate) << ','
       << format_real(row.ess) << ',' << row.gibbs_updates << ','
       << row.exact_samples << ',' << format_real(row.wall_time_seconds) << ','
       << row.seed << ',' << csv_escape(row.error) << '\n';
  }
}

void emit_csv(const SweepResult& result, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("emit_csv: cannot open " + path);
  emit_csv(result, os);
  os.flush();
  if (!os) throw std::runtime_error("emit_csv: write failed for " + path);
}

void generate_ising_data(int width, int height, double theta_coupling,
                         double theta_field, std::uint64_t seed,
                         const std::string& path) {
  Rng rng(seed);
  const IsingLattice lattice =
      cftp_exact_sample(width, height, IsingParams{theta_coupling, theta_field}, rng);
  write_lattice_file(path, lattice);
}

}  // namespace dimcmc
