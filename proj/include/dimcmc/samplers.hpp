// Parameter-space samplers for doubly-intractable posteriors. Five step
// rules over a common Model contract:
//
//   exact_z_mh_step         M-H with the true normalizer (oracle baseline)
//   savm_step               single auxiliary variable method
//   mavm_step               multiple auxiliary variables with K tempered
//                           bridging levels between a fixed point estimate
//                           theta_hat and the proposed parameters
//   exchange_step           one exact auxiliary draw per proposal; the data
//                           swaps owners between current and proposed theta
//   exchange_bridged_step   exchange with K bridging sweeps that make the
//                           auxiliary draw more attractive to the current
//                           parameters; K = 0 reduces to exchange_step
//                           bitwise, as mavm K = 0 reduces to savm_step
//
// All acceptance arithmetic is in log space; acceptance draws log(u) with
// u ~ Uniform(0,1], and a ratio >= 0 accepts without consuming u so that
// generator streams stay aligned across algorithm variants.
#pragma once

#include <Eigen/Core>

#include <cassert>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dimcmc/gamma.hpp"
#include "dimcmc/model.hpp"

namespace dimcmc {

template <typename Q>
concept ProposalDist = requires(const Q& q, const ParamPoint& to,
                                const ParamPoint& from, Rng& rng) {
  { q.sample(from, rng) } -> std::convertible_to<ParamPoint>;
  { q.log_density(to, from) } -> std::convertible_to<double>;
};

// The two proposal kinds used by the experiments: an independent draw from
// the analytic parameter posterior (Gaussian model only), and a spherical
// Gaussian random walk whose width is its per-component standard deviation.
class Proposal {
 public:
  enum class Kind { IndependentPosterior, RandomWalk };

  static Proposal independent_posterior(GammaParams posterior) {
    Proposal q;
    q.kind_ = Kind::IndependentPosterior;
    q.posterior_ = posterior;
    return q;
  }

  static Proposal random_walk(double width) {
    if (!(width > 0.0))
      throw std::invalid_argument("Proposal: random-walk width must be positive");
    Proposal q;
    q.kind_ = Kind::RandomWalk;
    q.width_ = width;
    return q;
  }

  Kind kind() const { return kind_; }
  double width() const { return width_; }

  ParamPoint sample(const ParamPoint& from, Rng& rng) const {
    if (kind_ == Kind::IndependentPosterior) {
      ParamPoint to(1);
      to[0] = gamma_sample(posterior_, rng);
      return to;
    }
    ParamPoint to(from.size());
    for (Eigen::Index i = 0; i < from.size(); ++i)
      to[i] = from[i] + width_ * normal01(rng);
    return to;
  }

  double log_density(const ParamPoint& to, const ParamPoint& from) const {
    if (kind_ == Kind::IndependentPosterior) return gamma_log_pdf(to[0], posterior_);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < from.size(); ++i) {
      const double z = (to[i] - from[i]) / width_;
      acc += -0.5 * z * z - std::log(width_) - 0.918938533204672742;  // log sqrt(2 pi)
    }
    return acc;
  }

 private:
  Kind kind_ = Kind::RandomWalk;
  double width_ = 1.0;
  GammaParams posterior_{};
};

static_assert(ProposalDist<Proposal>);

// One accept/reject decision with its log ratio split into the factors of
// the underlying formula: prior-and-likelihood, proposal density, and the
// auxiliary-variable (normalizer estimate) contribution.
struct AcceptanceRecord {
  double log_accept_ratio = 0.0;
  bool accepted = false;
  double target_term = 0.0;
  double proposal_term = 0.0;
  double auxiliary_term = 0.0;
};

inline bool metropolis_accept(double log_accept_ratio, Rng& rng) {
  if (log_accept_ratio >= 0.0) return true;
  return std::log(uniform_open01(rng)) < log_accept_ratio;
}

// log [p(th') f(y;th')] - log [p(th) f(y;th)]
template <Model M>
double target_log_ratio(const M& m, const ParamPoint& theta, const ParamPoint& theta_p) {
  return (m.log_prior(theta_p) + m.log_f(m.data(), theta_p)) -
         (m.log_prior(theta) + m.log_f(m.data(), theta));
}

// log q(th; th') - log q(th'; th); exactly zero for a symmetric walk.
template <typename Q>
  requires ProposalDist<Q>
double proposal_log_ratio(const Q& q, const ParamPoint& theta, const ParamPoint& theta_p) {
  return q.log_density(theta, theta_p) - q.log_density(theta_p, theta);
}

// SAVM auxiliary factor: [f(x';th_hat)/f(x';th')] * [f(x;th)/f(x;th_hat)],
// the two one-sample estimators of Z(th_hat)/Z(th') and Z(th)/Z(th_hat).
template <Model M>
double savm_aux_log_ratio(const M& m, const ParamPoint& theta_hat,
                          const ParamPoint& theta, const typename M::State& x,
                          const ParamPoint& theta_p, const typename M::State& x_p) {
  const double proposed_part = m.log_f(x_p, theta_hat) - m.log_f(x_p, theta_p);
  const double current_part = m.log_f(x, theta) - m.log_f(x, theta_hat);
  return proposed_part + current_part;
}

// MAVM auxiliary product over bridging levels, with ensembles ordered
// x_1..x_{K+1} (current) and x'_1..x'_{K+1} (proposed); level density
// f_k(x; th, th_hat) = f(x; th_hat)^beta_k f(x; th)^(1-beta_k).
template <Model M>
double mavm_aux_log_ratio(const M& m, const ParamPoint& theta_hat,
                          const BridgeSchedule& schedule, const ParamPoint& theta,
                          std::span<const typename M::State> ensemble,
                          const ParamPoint& theta_p,
                          std::span<const typename M::State> proposed) {
  const int levels = schedule.levels();
  assert(static_cast<int>(ensemble.size()) == levels + 1);
  assert(static_cast<int>(proposed.size()) == levels + 1);
  double acc = 0.0;
  for (int k = 0; k <= levels; ++k) {
    const double proposed_part =
        bridge_log_f(m, proposed[k], theta_hat, theta_p, schedule.betas[k]) -
        bridge_log_f(m, proposed[k], theta_hat, theta_p, schedule.betas[k + 1]);
    const double current_part =
        bridge_log_f(m, ensemble[k], theta_hat, theta, schedule.betas[k + 1]) -
        bridge_log_f(m, ensemble[k], theta_hat, theta, schedule.betas[k]);
    acc += proposed_part + current_part;
  }
  return acc;
}

// Exchange auxiliary factor f(w; th)/f(w; th'): how much the current
// parameters prefer the replacement data w over the proposal's claim to it.
template <Model M>
double exchange_aux_log_ratio(const M& m, const ParamPoint& theta,
                              const ParamPoint& theta_p, const typename M::State& w) {
  return m.log_f(w, theta) - m.log_f(w, theta_p);
}

// Bridged-exchange auxiliary product over x_0..x_K; level density
// f_k(x; th, th') = f(x; th')^beta_k f(x; th)^(1-beta_k).
template <Model M>
double exchange_bridged_aux_log_ratio(const M& m, const BridgeSchedule& schedule,
                                      const ParamPoint& theta, const ParamPoint& theta_p,
                                      std::span<const typename M::State> xs) {
  const int levels = schedule.levels();
  assert(static_cast<int>(xs.size()) == levels + 1);
  double acc = 0.0;
  for (int k = 0; k <= levels; ++k)
    acc += bridge_log_f(m, xs[k], theta_p, theta, schedule.betas[k + 1]) -
           bridge_log_f(m, xs[k], theta_p, theta, schedule.betas[k]);
  return acc;
}

namespace detail {

inline bool same_point(const ParamPoint& a, const ParamPoint& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

inline AcceptanceRecord prior_reject(WorkCounters& work) {
  AcceptanceRecord rec;
  rec.log_accept_ratio = -std::numeric_limits<double>::infinity();
  rec.target_term = rec.log_accept_ratio;
  rec.accepted = false;
  ++work.prior_rejects;
  return rec;
}

inline bool zero_prior_support(double log_prior) {
  return log_prior == -std::numeric_limits<double>::infinity();
}

}  // namespace detail

// Standard M-H against the exact posterior, using the true normalizer; only
// available on models that expose it.
template <ExactZModel M, ProposalDist Q>
AcceptanceRecord exact_z_mh_step(const M& m, const Q& proposal, ParamPoint& theta,
                                 Rng& rng, WorkCounters& work) {
  const ParamPoint theta_p = proposal.sample(theta, rng);
  if (detail::zero_prior_support(m.log_prior(theta_p))) return detail::prior_reject(work);

  AcceptanceRecord rec;
  rec.target_term = target_log_ratio(m, theta, theta_p);
  rec.proposal_term = proposal_log_ratio(proposal, theta, theta_p);
  rec.auxiliary_term = m.true_log_z(theta) - m.true_log_z(theta_p);
  rec.log_accept_ratio = rec.target_term + rec.proposal_term + rec.auxiliary_term;
  rec.accepted = metropolis_accept(rec.log_accept_ratio, rng);
  if (rec.accepted) theta = theta_p;
  return rec;
}

// One SAVM step. The auxiliary configuration x rides along as chain state;
// x' is drawn exactly at theta' and the pair (theta', x') is accepted or
// rejected jointly. Generator consumption per step: proposal draw, exact
// sample (skipped on zero prior support), then one uniform if the log ratio
// is negative.
template <Model M, ProposalDist Q>
AcceptanceRecord savm_step(const M& m, const ParamPoint& theta_hat, const Q& proposal,
                           ParamPoint& theta, typename M::State& aux, Rng& rng,
                           WorkCounters& work) {
  const ParamPoint theta_p = proposal.sample(theta, rng);
  if (detail::zero_prior_support(m.log_prior(theta_p))) return detail::prior_reject(work);

  const typename M::State aux_p = m.exact_sample(theta_p, rng, work);
  ++work.exact_samples_drawn;

  AcceptanceRecord rec;
  rec.target_term = target_log_ratio(m, theta, theta_p);
  rec.proposal_term = proposal_log_ratio(proposal, theta, theta_p);
  rec.auxiliary_term = savm_aux_log_ratio(m, theta_hat, theta, aux, theta_p, aux_p);
  rec.log_accept_ratio = rec.target_term + rec.proposal_term + rec.auxiliary_term;
  rec.accepted = metropolis_accept(rec.log_accept_ratio, rng);
  if (rec.accepted) {
    theta = theta_p;
    aux = aux_p;
  }
  return rec;
}

// One MAVM step. The proposed ensemble is generated in reverse order:
// x'_{K+1} exactly at theta', then x'_K..x'_1 by bridging transitions toward
// theta_hat (level k targets f(.;th_hat)^beta_k f(.;th')^(1-beta_k)). The
// current ensemble is chain state: it is replaced on acceptance and retained
// on rejection, never regenerated between proposals.
template <Model M, ProposalDist Q>
AcceptanceRecord mavm_step(const M& m, const ParamPoint& theta_hat,
                           const BridgeSchedule& schedule, const Q& proposal,
                           ParamPoint& theta, std::vector<typename M::State>& ensemble,
                           Rng& rng, WorkCounters& work) {
  const int levels = schedule.levels();
  assert(static_cast<int>(ensemble.size()) == levels + 1);
  const ParamPoint theta_p = proposal.sample(theta, rng);
  if (detail::zero_prior_support(m.log_prior(theta_p))) return detail::prior_reject(work);

  std::vector<typename M::State> proposed(levels + 1);
  proposed[levels] = m.exact_sample(theta_p, rng, work);
  ++work.exact_samples_drawn;
  for (int k = levels; k >= 1; --k) {
    proposed[k - 1] =
        m.bridge_transition(proposed[k], theta_hat, theta_p, schedule.betas[k], rng, work);
    ++work.bridge_steps;
  }

  AcceptanceRecord rec;
  rec.target_term = target_log_ratio(m, theta, theta_p);
  rec.proposal_term = proposal_log_ratio(proposal, theta, theta_p);
  rec.auxiliary_term =
      mavm_aux_log_ratio<M>(m, theta_hat, schedule, theta,
                            {ensemble.data(), ensemble.size()}, theta_p,
                            {proposed.data(), proposed.size()});
  rec.log_accept_ratio = rec.target_term + rec.proposal_term + rec.auxiliary_term;
  rec.accepted = metropolis_accept(rec.log_accept_ratio, rng);
  if (rec.accepted) {
    theta = theta_p;
    ensemble = std::move(proposed);
  }
  return rec;
}

// One exchange step: draw w exactly at theta', then decide whether theta
// hands the data over. No auxiliary state survives the step. A degenerate
// proposal theta' == theta must accept with log ratio exactly zero.
template <Model M, ProposalDist Q>
AcceptanceRecord exchange_step(const M& m, const Q& proposal, ParamPoint& theta,
                               Rng& rng, WorkCounters& work) {
  const ParamPoint theta_p = proposal.sample(theta, rng);
  if (detail::zero_prior_support(m.log_prior(theta_p))) return detail::prior_reject(work);

  const typename M::State w = m.exact_sample(theta_p, rng, work);
  ++work.exact_samples_drawn;

  AcceptanceRecord rec;
  rec.target_term = target_log_ratio(m, theta, theta_p);
  rec.proposal_term = proposal_log_ratio(proposal, theta, theta_p);
  rec.auxiliary_term = exchange_aux_log_ratio(m, theta, theta_p, w);
  rec.log_accept_ratio = rec.target_term + rec.proposal_term + rec.auxiliary_term;
  assert(!detail::same_point(theta, theta_p) || rec.log_accept_ratio == 0.0);
  rec.accepted = metropolis_accept(rec.log_accept_ratio, rng);
  if (rec.accepted) theta = theta_p;
  return rec;
}

// Exchange with K bridging levels: x_0 exactly at theta', then x_1..x_K via
// detailed-balance transitions for f(.;th')^beta_k f(.;th)^(1-beta_k),
// walking the auxiliary data toward the current parameters.
template <Model M, ProposalDist Q>
AcceptanceRecord exchange_bridged_step(const M& m, const BridgeSchedule& schedule,
                                       const Q& proposal, ParamPoint& theta, Rng& rng,
                                       WorkCounters& work) {
  const int levels = schedule.levels();
  const ParamPoint theta_p = proposal.sample(theta, rng);
  if (detail::zero_prior_support(m.log_prior(theta_p))) return detail::prior_reject(work);

  std::vector<typename M::State> xs(levels + 1);
  xs[0] = m.exact_sample(theta_p, rng, work);
  ++work.exact_samples_drawn;
  for (int k = 1; k <= levels; ++k) {
    xs[k] = m.bridge_transition(xs[k - 1], theta_p, theta, schedule.betas[k], rng, work);
    ++work.bridge_steps;
  }

  AcceptanceRecord rec;
  rec.target_term = target_log_ratio(m, theta, theta_p);
  rec.proposal_term = proposal_log_ratio(proposal, theta, theta_p);
  rec.auxiliary_term =
      exchange_bridged_aux_log_ratio<M>(m, schedule, theta, theta_p,
                                        {xs.data(), xs.size()});
  rec.log_accept_ratio = rec.target_term + rec.proposal_term + rec.auxiliary_term;
  assert(!detail::same_point(theta, theta_p) || rec.log_accept_ratio == 0.0);
  rec.accepted = metropolis_accept(rec.log_accept_ratio, rng);
  if (rec.accepted) theta = theta_p;
  return rec;
}

enum class Algorithm { ExactZMh, Savm, Mavm, Exchange, ExchangeBridged };

std::string algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

struct SamplerConfig {
  Algorithm algorithm = Algorithm::Exchange;
  int bridge_levels = 0;                 // K; mavm and exchange-bridged only
  std::optional<ParamPoint> theta_hat;   // savm and mavm only
  Proposal proposal = Proposal::random_walk(1.0);
  std::int64_t iterations = 1;
  ParamPoint initial_theta;
  std::uint64_t seed = 0;
};

// Every parameter sample of a finished run, with per-step acceptance flags
// and the work performed. Counter semantics: exact_samples_drawn counts one
// draw per proposal that survived the prior-support check (initialization
// draws for savm/mavm are excluded, so the column equals iterations minus
// prior rejects); gibbs_updates and bridge_steps include initialization.
struct ChainTrace {
  Eigen::MatrixXd theta_samples;          // iterations x param_dim
  std::vector<std::uint8_t> accept_flags;
  WorkCounters counters;
};

class ChainError : public std::runtime_error {
 public:
  ChainError(std::int64_t iteration, const std::string& what)
      : std::runtime_error("chain iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  std::int64_t iteration() const { return iteration_; }

 private:
  std::int64_t iteration_;
};

namespace detail {

template <typename StepFn>
void run_loop(ChainTrace& trace, std::int64_t iterations, const ParamPoint& theta,
              StepFn&& step) {
  for (std::int64_t t = 0; t < iterations; ++t) {
    AcceptanceRecord rec;
    try {
      rec = step();
    } catch (const std::exception& e) {
      throw ChainError(t, e.what());
    }
    trace.theta_samples.row(t) = theta.transpose();
    trace.accept_flags[t] = rec.accepted ? 1 : 0;
  }
}

template <Model M>
void validate_config(const M& m, const SamplerConfig& cfg) {
  if (cfg.iterations < 1)
    throw std::invalid_argument("SamplerConfig: iterations must be >= 1");
  if (cfg.bridge_levels < 0)
    throw std::invalid_argument("SamplerConfig: bridge levels must be >= 0");
  if (cfg.initial_theta.size() != m.param_dim())
    throw std::invalid_argument("SamplerConfig: initial theta has wrong dimension");
  if (!cfg.initial_theta.allFinite())
    throw std::invalid_argument("SamplerConfig: initial theta must be finite");
  if (zero_prior_support(m.log_prior(cfg.initial_theta)))
    throw std::invalid_argument("SamplerConfig: initial theta has no prior support");
  const bool needs_hat =
      cfg.algorithm == Algorithm::Savm || cfg.algorithm == Algorithm::Mavm;
  if (needs_hat != cfg.theta_hat.has_value())
    throw std::invalid_argument(
        "SamplerConfig: theta_hat must be present exactly when the algorithm uses it");
  if (cfg.theta_hat &&
      (cfg.theta_hat->size() != m.param_dim() || !cfg.theta_hat->allFinite()))
    throw std::invalid_argument("SamplerConfig: theta_hat invalid");
}

}  // namespace detail

// Runs the configured sampler for cfg.iterations steps from
// cfg.initial_theta, recording every sample. Bit-reproducible per seed.
template <Model M>
ChainTrace run_chain(const M& m, const SamplerConfig& cfg) {
  detail::validate_config(m, cfg);

  ChainTrace trace;
  trace.theta_samples.resize(cfg.iterations, m.param_dim());
  trace.accept_flags.assign(static_cast<std::size_t>(cfg.iterations), 0);
  WorkCounters& work = trace.counters;

  Rng rng(cfg.seed);
  ParamPoint theta = cfg.initial_theta;
  const BridgeSchedule schedule = default_beta_schedule(cfg.bridge_levels);

  switch (cfg.algorithm) {
    case Algorithm::ExactZMh: {
      if constexpr (ExactZModel<M>) {
        detail::run_loop(trace, cfg.iterations, theta, [&] {
          return exact_z_mh_step(m, cfg.proposal, theta, rng, work);
        });
      } else {
        throw std::invalid_argument(
            "run_chain: exact-z-mh needs a model with a tractable normalizer");
      }
      break;
    }
    case Algorithm::Savm: {
      typename M::State aux;
      try {
        aux = m.exact_sample(*cfg.theta_hat, rng, work);
      } catch (const std::exception& e) {
        throw ChainError(-1, std::string("initialization: ") + e.what());
      }
      detail::run_loop(trace, cfg.iterations, theta, [&] {
        return savm_step(m, *cfg.theta_hat, cfg.proposal, theta, aux, rng, work);
      });
      break;
    }
    case Algorithm::Mavm: {
      // Forward ensemble for the initial state: x_1 exactly at theta_hat,
      // then bridging transitions toward the initial theta.
      std::vector<typename M::State> ensemble(cfg.bridge_levels + 1);
      try {
        ensemble[0] = m.exact_sample(*cfg.theta_hat, rng, work);
        for (int k = 1; k <= cfg.bridge_levels; ++k) {
          ensemble[k] = m.bridge_transition(ensemble[k - 1], *cfg.theta_hat, theta,
                                            schedule.betas[k], rng, work);
          ++work.bridge_steps;
        }
      } catch (const std::exception& e) {
        throw ChainError(-1, std::string("initialization: ") + e.what());
      }
      detail::run_loop(trace, cfg.iterations, theta, [&] {
        return mavm_step(m, *cfg.theta_hat, schedule, cfg.proposal, theta, ensemble,
                         rng, work);
      });
      break;
    }
    case Algorithm::Exchange: {
      detail::run_loop(trace, cfg.iterations, theta, [&] {
        return exchange_step(m, cfg.proposal, theta, rng, work);
      });
      break;
    }
    case Algorithm::ExchangeBridged: {
      detail::run_loop(trace, cfg.iterations, theta, [&] {
        return exchange_bridged_step(m, schedule, cfg.proposal, theta, rng, work);
      });
      break;
    }
  }
  return trace;
}

}  // namespace dimcmc
