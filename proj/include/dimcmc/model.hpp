// Model contract shared by every sampler, plus the tempered-bridge machinery
// (geometric interpolation between two unnormalized densities) and the
// one-sample importance estimator for normalizer ratios.
#pragma once

#include <Eigen/Core>

#include <concepts>
#include <cstdint>
#include <stdexcept>

#include "dimcmc/rng.hpp"

namespace dimcmc {

// A parameter setting theta; dimension is fixed by the owning model.
using ParamPoint = Eigen::VectorXd;

// Work performed by a chain. exact_samples_drawn and bridge_steps are
// maintained by the samplers (one per proposal with prior support / one per
// bridging transition); gibbs_updates is maintained by the models themselves
// (site updates inside exact sampling and bridging sweeps), so CFTP work is
// charged to the chain that asked for it. prior_rejects counts proposals
// rejected on zero prior support before any exact sampling.
struct WorkCounters {
  std::uint64_t exact_samples_drawn = 0;
  std::uint64_t gibbs_updates = 0;
  std::uint64_t bridge_steps = 0;
  std::uint64_t prior_rejects = 0;
};

// The capabilities a model must provide to be sampled from:
//   log_f            unnormalized log density log f(x; theta)
//   log_prior        prior log density over theta (-inf for no support)
//   exact_sample     exact draw from f(.; theta)/Z(theta)
//   bridge_transition one transition that leaves
//                    p_beta ~ f(.;theta_a)^beta f(.;theta_b)^(1-beta)
//                    invariant and is in detailed balance with p_beta
//   data             the observed configuration y
// Instances are immutable after construction and safe to share across
// concurrently running chains; each chain owns its Rng and WorkCounters.
template <typename M>
concept Model = requires(const M& m, const typename M::State& x,
                         const ParamPoint& theta, Rng& rng,
                         WorkCounters& work) {
  typename M::State;
  { m.param_dim() } -> std::convertible_to<Eigen::Index>;
  { m.data() } -> std::convertible_to<const typename M::State&>;
  { m.log_f(x, theta) } -> std::convertible_to<double>;
  { m.log_prior(theta) } -> std::convertible_to<double>;
  { m.exact_sample(theta, rng, work) } -> std::convertible_to<typename M::State>;
  { m.bridge_transition(x, theta, theta, 0.5, rng, work) }
      -> std::convertible_to<typename M::State>;
};

// Models that additionally expose the true normalizer. Only the exact-Z
// Metropolis-Hastings baseline may require this; the Model contract above
// deliberately omits it, so no auxiliary-variable sampler can touch it.
template <typename M>
concept ExactZModel = Model<M> && requires(const M& m, const ParamPoint& theta) {
  { m.true_log_z(theta) } -> std::convertible_to<double>;
};

// Inverse temperatures for a tempered path with K intermediate levels.
// betas has K+2 entries: betas[0] = 1 and betas[K+1] = 0 are stored
// explicitly (both endpoint densities are indexed by the samplers), interior
// values are strictly decreasing.
struct BridgeSchedule {
  Eigen::VectorXd betas;
  int levels() const { return static_cast<int>(betas.size()) - 2; }
};

// The default schedule beta_k = (K - k + 1)/(K + 1), k = 1..K, with the
// endpoints pinned to exactly 1 and 0.
inline BridgeSchedule default_beta_schedule(int levels) {
  if (levels < 0) throw std::invalid_argument("default_beta_schedule: levels must be >= 0");
  BridgeSchedule s;
  s.betas.resize(levels + 2);
  s.betas[0] = 1.0;
  for (int k = 1; k <= levels; ++k)
    s.betas[k] = static_cast<double>(levels - k + 1) / static_cast<double>(levels + 1);
  s.betas[levels + 1] = 0.0;
  return s;
}

// log of the bridge density f(x;theta_a)^beta f(x;theta_b)^(1-beta).
// The endpoints and the degenerate theta_a == theta_b case return the plain
// log_f bit-for-bit (0 * -inf would otherwise poison the endpoint values,
// and self-transitions must cancel exactly).
template <Model M>
double bridge_log_f(const M& m, const typename M::State& x,
                    const ParamPoint& theta_a, const ParamPoint& theta_b,
                    double beta) {
  if (beta == 1.0) return m.log_f(x, theta_a);
  if (beta == 0.0) return m.log_f(x, theta_b);
  if (theta_a.size() == theta_b.size() &&
      (theta_a.array() == theta_b.array()).all())
    return m.log_f(x, theta_a);
  return beta * m.log_f(x, theta_a) + (1.0 - beta) * m.log_f(x, theta_b);
}

// log of the one-sample importance estimate of Z(theta_num)/Z(theta_den),
// valid when x was drawn from f(.; theta_den)/Z(theta_den). exp of the
// return value is unbiased for the ratio.
template <Model M>
double log_z_ratio_estimate(const M& m, const typename M::State& x,
                            const ParamPoint& theta_num,
                            const ParamPoint& theta_den) {
  return m.log_f(x, theta_num) - m.log_f(x, theta_den);
}

}  // namespace dimcmc
