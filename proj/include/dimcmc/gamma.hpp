#pragma once

#include "dimcmc/rng.hpp"

namespace dimcmc {

// Shape/rate parameterization throughout (mean = shape/rate), matching the
// additive conjugate update of the Gaussian precision posterior.
struct GammaParams {
  double shape = 1.0;
  double rate = 1.0;
};

// Normalized log density; -inf for x <= 0.
double gamma_log_pdf(double x, const GammaParams& p);

// Regularized CDF P(shape, rate * x).
double gamma_cdf(double x, const GammaParams& p);

// Marsaglia-Tsang rejection sampler; deterministic per seed.
double gamma_sample(const GammaParams& p, Rng& rng);

}  // namespace dimcmc
