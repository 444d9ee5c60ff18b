#include "dimcmc/gaussian.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dimcmc {

namespace {

double scalar_theta(const ParamPoint& theta) {
  assert(theta.size() == 1);
  return theta[0];
}

double require_positive(double theta) {
  if (!(theta > 0.0))
    throw std::domain_error("GaussianPrecisionModel: precision must be positive");
  return theta;
}

}  // namespace

GaussianPrecisionModel::GaussianPrecisionModel(double alpha, double beta_prior,
                                               Eigen::VectorXd data)
    : alpha_(alpha), beta_prior_(beta_prior), data_(std::move(data)) {
  if (!(alpha_ > 0.0) || !(beta_prior_ > 0.0))
    throw std::invalid_argument("GaussianPrecisionModel: prior shape and rate must be positive");
  if (!data_.allFinite())
    throw std::invalid_argument("GaussianPrecisionModel: data must be finite");
}

double GaussianPrecisionModel::log_f(const State& x, const ParamPoint& theta) const {
  const double th = require_positive(scalar_theta(theta));
  return -0.5 * th * x.squaredNorm();
}

double GaussianPrecisionModel::log_prior(const ParamPoint& theta) const {
  return gamma_log_pdf(scalar_theta(theta), GammaParams{alpha_, beta_prior_});
}

GaussianPrecisionModel::State GaussianPrecisionModel::exact_sample(
    const ParamPoint& theta, Rng& rng, WorkCounters&) const {
  const double th = require_positive(scalar_theta(theta));
  const double sigma = 1.0 / std::sqrt(th);
  State x(data_.size());
  for (Eigen::Index n = 0; n < x.size(); ++n) x[n] = sigma * normal01(rng);
  return x;
}

GaussianPrecisionModel::State GaussianPrecisionModel::bridge_transition(
    const State&, const ParamPoint& theta_a, const ParamPoint& theta_b,
    double beta, Rng& rng, WorkCounters& work) const {
  require_positive(scalar_theta(theta_a));
  require_positive(scalar_theta(theta_b));
  if (!(beta >= 0.0 && beta <= 1.0))
    throw std::domain_error("bridge_transition: beta must lie in [0,1]");
  ParamPoint eff(1);
  eff[0] = beta * theta_a[0] + (1.0 - beta) * theta_b[0];
  return exact_sample(eff, rng, work);
}

double GaussianPrecisionModel::true_log_z(const ParamPoint& theta) const {
  const double th = require_positive(scalar_theta(theta));
  return 0.5 * static_cast<double>(data_.size()) *
         std::log(2.0 * 3.14159265358979323846264338327950288 / th);
}

GammaParams GaussianPrecisionModel::posterior_params() const {
  return GammaParams{0.5 * static_cast<double>(data_.size()) + alpha_,
                     0.5 * data_.squaredNorm() + beta_prior_};
}

}  // namespace dimcmc
