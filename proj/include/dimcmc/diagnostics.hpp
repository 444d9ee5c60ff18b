// Chain quality metrics: acceptance rate, effective sample size via Geyer's
// initial-positive-sequence rule, work-normalized efficiency, and a
// one-sample Kolmogorov-Smirnov test against a reference CDF.
#pragma once

#include <Eigen/Core>

#include <functional>

#include "dimcmc/samplers.hpp"

namespace dimcmc {

// Fraction of accepted steps; domain error on an empty trace.
double acceptance_rate(const ChainTrace& trace);

struct EssEstimate {
  double ess = 0.0;
  double autocorrelation_time = 1.0;
  bool degenerate = false;  // constant series; autocorrelation undefined
  static constexpr const char* method = "initial-positive-sequence";
};

// ESS = T / tau with tau = 1 + 2 sum_k rho_k, autocorrelations summed while
// Geyer's consecutive lag-pair sums stay positive; tau is clamped to >= 1.
// Requires length >= 10. A constant series yields ess = 0 with the
// degenerate flag set.
EssEstimate effective_sample_size(const Eigen::VectorXd& series);

// ESS of the series divided by the trace's Gibbs-update count; normalizing
// against a baseline is the caller's division. Domain error when the counter
// is zero.
double efficiency(const ChainTrace& trace, const Eigen::VectorXd& series);

struct KsResult {
  double statistic = 0.0;
  bool pass_at_0p01 = false;
};

// One-sample KS statistic against the asymptotic 0.01 critical value
// 1.628/sqrt(n). Samples should be approximately independent (thin first);
// requires n >= 30.
KsResult ks_test(const Eigen::VectorXd& samples,
                 const std::function<double(double)>& cdf);

}  // namespace dimcmc
