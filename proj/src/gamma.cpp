#include "dimcmc/gamma.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "dimcmc/special.hpp"

namespace dimcmc {

namespace {

void check(const GammaParams& p) {
  if (!(p.shape > 0.0) || !(p.rate > 0.0))
    throw std::domain_error("gamma: shape and rate must be positive");
}

// Marsaglia & Tsang (2000) for shape >= 1, unit rate.
double sample_shape_ge1(double shape, Rng& rng) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal01(rng);
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = uniform_open01(rng);
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace

double gamma_log_pdf(double x, const GammaParams& p) {
  check(p);
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return p.shape * std::log(p.rate) - std::lgamma(p.shape) +
         (p.shape - 1.0) * std::log(x) - p.rate * x;
}

double gamma_cdf(double x, const GammaParams& p) {
  check(p);
  if (x <= 0.0) return 0.0;
  return gamma_p(p.shape, p.rate * x);
}

double gamma_sample(const GammaParams& p, Rng& rng) {
  check(p);
  if (p.shape >= 1.0) return sample_shape_ge1(p.shape, rng) / p.rate;
  // Boost to shape+1, then scale by u^(1/shape).
  const double g = sample_shape_ge1(p.shape + 1.0, rng);
  const double u = uniform_open01(rng);
  return g * std::pow(u, 1.0 / p.shape) / p.rate;
}

}  // namespace dimcmc
