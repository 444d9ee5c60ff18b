// Conjugate Gaussian precision model: N i.i.d. zero-mean observations with
// unknown precision theta, Gamma(alpha, beta) prior. The normalizer
// Z(theta) = (2 pi / theta)^(N/2) and the Gamma posterior are known in
// closed form, which makes this the ground-truth model for validating the
// doubly-intractable samplers: they only ever see the unnormalized
// log f(x; theta) = -(theta/2) sum x_n^2.
#pragma once

#include <Eigen/Core>

#include "dimcmc/gamma.hpp"
#include "dimcmc/model.hpp"

namespace dimcmc {

class GaussianPrecisionModel {
 public:
  using State = Eigen::VectorXd;

  GaussianPrecisionModel(double alpha, double beta_prior, Eigen::VectorXd data);

  Eigen::Index param_dim() const { return 1; }
  const State& data() const { return data_; }

  // -(theta/2) * sum x_n^2; theta must be positive.
  double log_f(const State& x, const ParamPoint& theta) const;

  // Gamma(alpha, beta_prior) log density; -inf outside (0, inf).
  double log_prior(const ParamPoint& theta) const;

  // N independent draws from N(0, 1/theta).
  State exact_sample(const ParamPoint& theta, Rng& rng, WorkCounters& work) const;

  // Independence resampler from the bridge density, which stays in the
  // family: p_beta is N(0, 1/theta_eff) per component with
  // theta_eff = beta*theta_a + (1-beta)*theta_b. An independent exact draw
  // trivially satisfies detailed balance.
  State bridge_transition(const State& x, const ParamPoint& theta_a,
                          const ParamPoint& theta_b, double beta, Rng& rng,
                          WorkCounters& work) const;

  // (N/2) log(2 pi / theta). Withheld from the Model contract; only the
  // exact-Z baseline sampler sees it.
  double true_log_z(const ParamPoint& theta) const;

  // Conjugate posterior Gamma(N/2 + alpha, sum y^2/2 + beta_prior).
  GammaParams posterior_params() const;

  double alpha() const { return alpha_; }
  double beta_prior() const { return beta_prior_; }

 private:
  double alpha_;
  double beta_prior_;
  Eigen::VectorXd data_;
};

static_assert(ExactZModel<GaussianPrecisionModel>);

}  // namespace dimcmc
