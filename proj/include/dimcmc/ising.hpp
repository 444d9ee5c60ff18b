// Toroidal square-lattice Ising model:
//   f(y; theta) = exp( theta_J sum_{(i,j) in E} y_i y_j + theta_h sum_i y_i )
// with spins in {-1,+1} and E the set of nearest-neighbour torus edges,
// self-edges excluded. Provides the heat-bath sweep operators, a monotone
// coupling-from-the-past exact sampler (ferromagnetic theta_J >= 0 only),
// the maximum pseudo-likelihood point estimate, and a tiny-lattice
// enumeration oracle used by the tests.
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "dimcmc/model.hpp"

namespace dimcmc {

struct IsingParams {
  double coupling = 0.0;  // theta_J
  double field = 0.0;     // theta_h
};

inline ParamPoint to_param_point(const IsingParams& p) {
  ParamPoint theta(2);
  theta << p.coupling, p.field;
  return theta;
}

inline IsingParams to_ising_params(const ParamPoint& theta) {
  if (theta.size() != 2)
    throw std::invalid_argument("IsingParams: parameter point must have dimension 2");
  return IsingParams{theta[0], theta[1]};
}

// Row-major spin grid on a torus; every spin is exactly -1 or +1.
struct IsingLattice {
  int width = 0;
  int height = 0;
  Eigen::ArrayXi spins;

  int size() const { return width * height; }
  int& at(int row, int col) { return spins[row * width + col]; }
  int at(int row, int col) const { return spins[row * width + col]; }

  bool operator==(const IsingLattice& other) const {
    return width == other.width && height == other.height &&
           (spins == other.spins).all();
  }
};

IsingLattice make_lattice(int width, int height, int fill);  // fill in {-1,+1}

// Raised when CFTP exceeds its sweep budget; the draw is abandoned rather
// than truncated.
class CftpBudgetError : public std::runtime_error {
 public:
  explicit CftpBudgetError(const std::string& what) : std::runtime_error(what) {}
};

// theta_J * (sum over each torus edge once of y_i y_j) + theta_h * sum_i y_i.
// Degenerate 1-wide/1-tall dimensions contribute no edges (no self-edges);
// width-2/height-2 wraparound yields doubled parallel edges, consistent with
// the 4-neighbour conditionals below.
double ising_log_f(const IsingLattice& lattice, const IsingParams& params);

// Number of edges in the multigraph above (2*w*h when both dims >= 2).
std::int64_t ising_edge_count(int width, int height);

// Heat-bath conditional p(y_i = +1 | neighbours) = logistic(2(theta_J * s + theta_h))
// where s is the signed neighbour sum.
double ising_conditional_p_plus(const IsingParams& params, int neighbour_sum);

// One systematic raster-order heat-bath sweep; w*h site updates.
void gibbs_sweep_inplace(IsingLattice& lattice, const IsingParams& params, Rng& rng);
IsingLattice gibbs_sweep(IsingLattice lattice, const IsingParams& params, Rng& rng);

// Sweep targeting the bridge density f(.;a)^beta f(.;b)^(1-beta). The Ising
// exponent is linear in theta, so the bridge is an Ising model at the
// interpolated parameters and the sweep is exact.
IsingLattice bridged_gibbs_sweep(IsingLattice lattice, const IsingParams& theta_a,
                                 const IsingParams& theta_b, double beta, Rng& rng);

// Exact draw from f(.; params)/Z(params) by monotone CFTP: all-up and
// all-down boundary chains driven by common per-site uniforms, epochs
// doubling backward (1, 2, 4, ... sweeps) with each epoch's stream reseeded
// from (master, epoch) so the same randomness is replayed at the same time
// step across restarts. Requires theta_J >= 0; throws CftpBudgetError if the
// chains have not coalesced after 2^20 sweeps. If sweep_count/site_updates
// are non-null they receive the number of coupled sweeps of the successful
// restart and the total site updates over all restarts (2 per site visit
// while the chains are coupled).
IsingLattice cftp_exact_sample(int width, int height, const IsingParams& params,
                               Rng& rng, std::uint64_t* sweep_count = nullptr,
                               std::uint64_t* site_updates = nullptr);

// Maximum pseudo-likelihood estimate of (theta_J, theta_h) from one observed
// lattice: damped Newton ascent on the concave conditional log-likelihood,
// clipped to the box [0,1] x [-1,1].
IsingParams pseudolikelihood_estimate(const IsingLattice& data);

// Pseudo-log-likelihood objective itself (exposed for the estimator tests).
double pseudolikelihood_log(const IsingLattice& data, const IsingParams& params);

// Exact Boltzmann distribution over all 2^(w*h) states, w*h <= 16. State s
// encodes spins by bit: spin_i = +1 iff bit i of s is set, i row-major.
struct BoltzmannTable {
  Eigen::VectorXd probs;
  double log_z = 0.0;
};
BoltzmannTable enumerate_boltzmann(int width, int height, const IsingParams& params);

IsingLattice decode_state(int width, int height, std::uint32_t bits);
std::uint32_t encode_state(const IsingLattice& lattice);

// Text serialization: "width height" then height rows of width +-1 entries.
void write_lattice(std::ostream& os, const IsingLattice& lattice);
IsingLattice read_lattice(std::istream& is);
void write_lattice_file(const std::string& path, const IsingLattice& lattice);
IsingLattice read_lattice_file(const std::string& path);

// Posterior problem over theta = (theta_J, theta_h) given one observed
// lattice, with the uniform prior over (0,1) x (-1,1). Fulfills the Model
// contract: exact sampling via CFTP, bridging via interpolated-parameter
// Gibbs sweeps.
class IsingPosteriorModel {
 public:
  using State = IsingLattice;

  explicit IsingPosteriorModel(IsingLattice observed);

  Eigen::Index param_dim() const { return 2; }
  const State& data() const { return data_; }

  double log_f(const State& x, const ParamPoint& theta) const;
  double log_prior(const ParamPoint& theta) const;
  State exact_sample(const ParamPoint& theta, Rng& rng, WorkCounters& work) const;
  State bridge_transition(const State& x, const ParamPoint& theta_a,
                          const ParamPoint& theta_b, double beta, Rng& rng,
                          WorkCounters& work) const;

 private:
  IsingLattice data_;
};

static_assert(Model<IsingPosteriorModel>);

}  // namespace dimcmc
