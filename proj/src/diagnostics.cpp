#include "dimcmc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace dimcmc {

double acceptance_rate(const ChainTrace& trace) {
  if (trace.accept_flags.empty())
    throw std::domain_error("acceptance_rate: empty trace");
  const double accepted =
      std::accumulate(trace.accept_flags.begin(), trace.accept_flags.end(), 0.0);
  return accepted / static_cast<double>(trace.accept_flags.size());
}

EssEstimate effective_sample_size(const Eigen::VectorXd& series) {
  const Eigen::Index n = series.size();
  if (n < 10) throw std::domain_error("effective_sample_size: need length >= 10");

  const double mean = series.mean();
  const Eigen::VectorXd centered = series.array() - mean;
  const double var = centered.squaredNorm() / static_cast<double>(n);

  EssEstimate est;
  if (var <= 0.0) {
    est.ess = 0.0;
    est.autocorrelation_time = std::numeric_limits<double>::infinity();
    est.degenerate = true;
    return est;
  }

  auto rho = [&](Eigen::Index lag) {
    return centered.head(n - lag).dot(centered.tail(n - lag)) /
           (static_cast<double>(n) * var);
  };

  // tau = -1 + 2 * sum of consecutive lag-pair sums (rho_0 + rho_1),
  // (rho_2 + rho_3), ... while they remain positive.
  double pair_total = 0.0;
  for (Eigen::Index k = 0; k + 1 < n; k += 2) {
    const double pair = rho(k) + rho(k + 1);
    if (pair <= 0.0) break;
    pair_total += pair;
  }
  const double tau = std::max(1.0, -1.0 + 2.0 * pair_total);
  est.autocorrelation_time = tau;
  est.ess = static_cast<double>(n) / tau;
  return est;
}

double efficiency(const ChainTrace& trace, const Eigen::VectorXd& series) {
  if (trace.counters.gibbs_updates == 0)
    throw std::domain_error("efficiency: trace performed no Gibbs updates");
  return effective_sample_size(series).ess /
         static_cast<double>(trace.counters.gibbs_updates);
}

KsResult ks_test(const Eigen::VectorXd& samples,
                 const std::function<double(double)>& cdf) {
  const Eigen::Index n = samples.size();
  if (n < 30) throw std::domain_error("ks_test: need at least 30 samples");

  std::vector<double> sorted(samples.data(), samples.data() + n);
  std::sort(sorted.begin(), sorted.end());

  double stat = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double f = cdf(sorted[static_cast<std::size_t>(i)]);
    const double lo = static_cast<double>(i) / static_cast<double>(n);
    const double hi = static_cast<double>(i + 1) / static_cast<double>(n);
    stat = std::max(stat, std::max(f - lo, hi - f));
  }

  KsResult result;
  result.statistic = stat;
  result.pass_at_0p01 = stat < 1.628 / std::sqrt(static_cast<double>(n));
  return result;
}

}  // namespace dimcmc
