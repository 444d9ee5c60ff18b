#include "dimcmc/ising.hpp"

#include <Eigen/Dense>

#include <cassert>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace dimcmc {

namespace {

// Signed neighbour sum with multiplicity: 4 entries on proper tori, parallel
// edges doubled at width/height 2, self-edges dropped at width/height 1.
inline int neighbour_sum(const IsingLattice& L, int r, int c) {
  const int w = L.width;
  const int h = L.height;
  const int* s = L.spins.data();
  int acc = 0;
  if (w > 1) {
    acc += s[r * w + (c + 1 == w ? 0 : c + 1)];
    acc += s[r * w + (c == 0 ? w - 1 : c - 1)];
  }
  if (h > 1) {
    acc += s[(r + 1 == h ? 0 : r + 1) * w + c];
    acc += s[(r == 0 ? h - 1 : r - 1) * w + c];
  }
  return acc;
}

struct ConditionalTable {
  // p(y_i = +1 | neighbour sum s) for s = -4..4, indexed s+4.
  double p_plus[9];

  explicit ConditionalTable(const IsingParams& params) {
    for (int s = -4; s <= 4; ++s)
      p_plus[s + 4] = ising_conditional_p_plus(params, s);
  }
};

inline void heat_bath_sweep(IsingLattice& L, const ConditionalTable& table, Rng& rng) {
  for (int r = 0; r < L.height; ++r)
    for (int c = 0; c < L.width; ++c) {
      const double u = uniform01(rng);
      L.at(r, c) = u < table.p_plus[neighbour_sum(L, r, c) + 4] ? 1 : -1;
    }
}

// One sweep of both boundary chains under common per-site uniforms. The
// conditional is monotone in the neighbour sum, so upper >= lower sitewise
// is preserved; asserted at every update.
inline void coupled_sweep(IsingLattice& up, IsingLattice& dn,
                          const ConditionalTable& table, Rng& rng) {
  for (int r = 0; r < up.height; ++r)
    for (int c = 0; c < up.width; ++c) {
      const double u = uniform01(rng);
      up.at(r, c) = u < table.p_plus[neighbour_sum(up, r, c) + 4] ? 1 : -1;
      dn.at(r, c) = u < table.p_plus[neighbour_sum(dn, r, c) + 4] ? 1 : -1;
      assert(up.at(r, c) >= dn.at(r, c));
    }
}

IsingParams interpolate(const IsingParams& a, const IsingParams& b, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0))
    throw std::domain_error("bridged sweep: beta must lie in [0,1]");
  if (beta == 1.0) return a;
  if (beta == 0.0) return b;
  return IsingParams{beta * a.coupling + (1.0 - beta) * b.coupling,
                     beta * a.field + (1.0 - beta) * b.field};
}

void check_spins(const IsingLattice& L) {
  if (L.width < 1 || L.height < 1 || L.spins.size() != L.size())
    throw std::invalid_argument("IsingLattice: inconsistent dimensions");
  if (!((L.spins == 1) || (L.spins == -1)).all())
    throw std::invalid_argument("IsingLattice: spins must be -1 or +1");
}

}  // namespace

IsingLattice make_lattice(int width, int height, int fill) {
  if (width < 1 || height < 1)
    throw std::invalid_argument("make_lattice: dimensions must be positive");
  if (fill != 1 && fill != -1)
    throw std::invalid_argument("make_lattice: fill must be -1 or +1");
  IsingLattice L;
  L.width = width;
  L.height = height;
  L.spins = Eigen::ArrayXi::Constant(width * height, fill);
  return L;
}

double ising_log_f(const IsingLattice& L, const IsingParams& params) {
  const int w = L.width;
  const int h = L.height;
  const int* s = L.spins.data();
  std::int64_t edge_sum = 0;
  std::int64_t site_sum = 0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const int yi = s[r * w + c];
      site_sum += yi;
      if (w > 1) edge_sum += yi * s[r * w + (c + 1 == w ? 0 : c + 1)];
      if (h > 1) edge_sum += yi * s[(r + 1 == h ? 0 : r + 1) * w + c];
    }
  return params.coupling * static_cast<double>(edge_sum) +
         params.field * static_cast<double>(site_sum);
}

std::int64_t ising_edge_count(int width, int height) {
  if (width < 1 || height < 1)
    throw std::invalid_argument("ising_edge_count: dimensions must be positive");
  const std::int64_t n = static_cast<std::int64_t>(width) * height;
  std::int64_t edges = 0;
  if (width > 1) edges += n;
  if (height > 1) edges += n;
  return edges;
}

double ising_conditional_p_plus(const IsingParams& params, int neighbour_sum) {
  const double z = 2.0 * (params.coupling * neighbour_sum + params.field);
  return 1.0 / (1.0 + std::exp(-z));
}

void gibbs_sweep_inplace(IsingLattice& lattice, const IsingParams& params, Rng& rng) {
  const ConditionalTable table(params);
  heat_bath_sweep(lattice, table, rng);
}

IsingLattice gibbs_sweep(IsingLattice lattice, const IsingParams& params, Rng& rng) {
  gibbs_sweep_inplace(lattice, params, rng);
  return lattice;
}

IsingLattice bridged_gibbs_sweep(IsingLattice lattice, const IsingParams& theta_a,
                                 const IsingParams& theta_b, double beta, Rng& rng) {
  gibbs_sweep_inplace(lattice, interpolate(theta_a, theta_b, beta), rng);
  return lattice;
}

IsingLattice cftp_exact_sample(int width, int height, const IsingParams& params,
                               Rng& rng, std::uint64_t* sweep_count,
                               std::uint64_t* site_updates) {
  if (width < 1 || height < 1)
    throw std::invalid_argument("cftp_exact_sample: dimensions must be positive");
  if (!std::isfinite(params.coupling) || !std::isfinite(params.field))
    throw std::domain_error("cftp_exact_sample: parameters must be finite");
  if (params.coupling < 0.0)
    throw std::domain_error(
        "cftp_exact_sample: monotone CFTP requires ferromagnetic theta_J >= 0");

  const ConditionalTable table(params);
  const std::uint64_t master = rng();
  const std::uint64_t updates_per_sweep =
      2ull * static_cast<std::uint64_t>(width) * static_cast<std::uint64_t>(height);
  std::uint64_t updates = 0;

  // Restart m runs both chains from time -2^m; hard cap 2^20 sweeps.
  constexpr int kMaxExponent = 20;
  for (int m = 0; m <= kMaxExponent; ++m) {
    IsingLattice up = make_lattice(width, height, +1);
    IsingLattice dn = make_lattice(width, height, -1);
    // Epoch k covers times [-2^k, -2^(k-1)) and is driven by a stream seeded
    // from (master, k) only, so each restart replays identical randomness at
    // identical time steps. Epochs run oldest-first.
    for (int k = m; k >= 0; --k) {
      Rng stream(derive_seed(master, static_cast<std::uint64_t>(k)));
      const std::int64_t sweeps = k == 0 ? 1 : std::int64_t{1} << (k - 1);
      for (std::int64_t t = 0; t < sweeps; ++t) {
        coupled_sweep(up, dn, table, stream);
        updates += updates_per_sweep;
      }
    }
    if (up == dn) {
      if (sweep_count) *sweep_count = std::uint64_t{1} << m;
      if (site_updates) *site_updates = updates;
      return up;
    }
  }
  throw CftpBudgetError("cftp_exact_sample: no coalescence within 2^20 sweeps");
}

namespace {

// The pseudo-likelihood of a lattice depends on the data only through the
// per-site pair (a, b) = (y_i * neighbour_sum_i, y_i); the objective is
// sum_i log sigma(2 (theta_J a_i + theta_h b_i)), jointly concave.
struct PlStats {
  // count[a+4][(b+1)/2], a in -4..4, b in {-1,+1}
  double count[9][2] = {};

  explicit PlStats(const IsingLattice& data) {
    for (int r = 0; r < data.height; ++r)
      for (int c = 0; c < data.width; ++c) {
        const int y = data.at(r, c);
        const int a = y * neighbour_sum(data, r, c);
        count[a + 4][(y + 1) / 2] += 1.0;
      }
  }

  template <typename F>
  void for_each(F&& f) const {
    for (int ai = 0; ai < 9; ++ai)
      for (int bi = 0; bi < 2; ++bi)
        if (count[ai][bi] > 0.0)
          f(static_cast<double>(ai - 4), static_cast<double>(2 * bi - 1), count[ai][bi]);
  }

  double objective(const IsingParams& p) const {
    double obj = 0.0;
    for_each([&](double a, double b, double n) {
      const double t = 2.0 * (p.coupling * a + p.field * b);
      // log sigma(t), stable for both signs
      const double ls = t > 0.0 ? -std::log1p(std::exp(-t)) : t - std::log1p(std::exp(t));
      obj += n * ls;
    });
    return obj;
  }

  void gradient_hessian(const IsingParams& p, Eigen::Vector2d& g, Eigen::Matrix2d& H) const {
    g.setZero();
    H.setZero();
    for_each([&](double a, double b, double n) {
      const double t = 2.0 * (p.coupling * a + p.field * b);
      const double sig = 1.0 / (1.0 + std::exp(-t));
      const double w1 = 2.0 * (1.0 - sig);        // d/dtheta of log sigma per unit (a,b)
      const double w2 = 4.0 * sig * (1.0 - sig);  // -d2/dtheta2
      g[0] += n * w1 * a;
      g[1] += n * w1 * b;
      H(0, 0) -= n * w2 * a * a;
      H(0, 1) -= n * w2 * a * b;
      H(1, 1) -= n * w2 * b * b;
    });
    H(1, 0) = H(0, 1);
  }
};

constexpr double kPlBoxLo[2] = {0.0, -1.0};
constexpr double kPlBoxHi[2] = {1.0, 1.0};

Eigen::Vector2d clip_to_box(Eigen::Vector2d x) {
  for (int i = 0; i < 2; ++i) x[i] = std::min(kPlBoxHi[i], std::max(kPlBoxLo[i], x[i]));
  return x;
}

// KKT residual: gradient components pointing out of the box at an active
// bound do not count.
double projected_gradient_norm(const Eigen::Vector2d& x, const Eigen::Vector2d& g) {
  double norm = 0.0;
  for (int i = 0; i < 2; ++i) {
    double gi = g[i];
    if (x[i] <= kPlBoxLo[i] && gi < 0.0) gi = 0.0;
    if (x[i] >= kPlBoxHi[i] && gi > 0.0) gi = 0.0;
    norm = std::max(norm, std::fabs(gi));
  }
  return norm;
}

}  // namespace

double pseudolikelihood_log(const IsingLattice& data, const IsingParams& params) {
  check_spins(data);
  return PlStats(data).objective(params);
}

IsingParams pseudolikelihood_estimate(const IsingLattice& data) {
  check_spins(data);
  const PlStats stats(data);

  Eigen::Vector2d x(0.5, 0.0);
  double fx = stats.objective(IsingParams{x[0], x[1]});
  Eigen::Vector2d g;
  Eigen::Matrix2d H;

  for (int iter = 0; iter < 200; ++iter) {
    stats.gradient_hessian(IsingParams{x[0], x[1]}, g, H);
    if (projected_gradient_norm(x, g) < 1e-8) break;

    // Damped Newton: -(H - ridge I) is positive definite even for rank-one
    // Hessians (constant data).
    const double ridge = 1e-9 * std::max(1.0, -H.trace());
    Eigen::Matrix2d A = -H;
    A(0, 0) += ridge;
    A(1, 1) += ridge;
    Eigen::Vector2d dir = A.ldlt().solve(g);

    bool improved = false;
    for (double step = 1.0; step > 1e-14; step *= 0.5) {
      const Eigen::Vector2d xn = clip_to_box(x + step * dir);
      const double fn = stats.objective(IsingParams{xn[0], xn[1]});
      if (fn > fx) {
        x = xn;
        fx = fn;
        improved = true;
        break;
      }
    }
    if (!improved) {
      // Fall back to a projected gradient step before giving up.
      for (double step = 1.0; step > 1e-14; step *= 0.5) {
        const Eigen::Vector2d xn = clip_to_box(x + step * g);
        const double fn = stats.objective(IsingParams{xn[0], xn[1]});
        if (fn > fx) {
          x = xn;
          fx = fn;
          improved = true;
          break;
        }
      }
      if (!improved) break;
    }
  }
  x = clip_to_box(x);
  return IsingParams{x[0], x[1]};
}

IsingLattice decode_state(int width, int height, std::uint32_t bits) {
  IsingLattice L = make_lattice(width, height, -1);
  for (int i = 0; i < L.size(); ++i)
    if (bits & (std::uint32_t{1} << i)) L.spins[i] = 1;
  return L;
}

std::uint32_t encode_state(const IsingLattice& L) {
  std::uint32_t bits = 0;
  for (int i = 0; i < L.size(); ++i)
    if (L.spins[i] > 0) bits |= std::uint32_t{1} << i;
  return bits;
}

BoltzmannTable enumerate_boltzmann(int width, int height, const IsingParams& params) {
  if (width < 1 || height < 1)
    throw std::invalid_argument("enumerate_boltzmann: dimensions must be positive");
  const int n = width * height;
  if (n > 16)
    throw std::domain_error("enumerate_boltzmann: lattice exceeds 16 sites");

  const std::uint32_t count = std::uint32_t{1} << n;
  Eigen::VectorXd logw(count);
  for (std::uint32_t s = 0; s < count; ++s)
    logw[s] = ising_log_f(decode_state(width, height, s), params);

  const double mx = logw.maxCoeff();
  Eigen::VectorXd scaled = (logw.array() - mx).exp();
  const double total = scaled.sum();

  BoltzmannTable table;
  table.probs = scaled / total;
  table.log_z = mx + std::log(total);
  return table;
}

void write_lattice(std::ostream& os, const IsingLattice& L) {
  check_spins(L);
  os << L.width << ' ' << L.height << '\n';
  for (int r = 0; r < L.height; ++r) {
    for (int c = 0; c < L.width; ++c) {
      if (c > 0) os << ' ';
      os << L.at(r, c);
    }
    os << '\n';
  }
}

IsingLattice read_lattice(std::istream& is) {
  int w = 0;
  int h = 0;
  if (!(is >> w >> h) || w < 1 || h < 1)
    throw std::runtime_error("read_lattice: bad header");
  IsingLattice L = make_lattice(w, h, 1);
  for (int i = 0; i < L.size(); ++i) {
    int v = 0;
    if (!(is >> v) || (v != 1 && v != -1))
      throw std::runtime_error("read_lattice: spins must be -1 or +1");
    L.spins[i] = v;
  }
  return L;
}

void write_lattice_file(const std::string& path, const IsingLattice& L) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_lattice_file: cannot open " + path);
  write_lattice(os, L);
  if (!os) throw std::runtime_error("write_lattice_file: write failed for " + path);
}

IsingLattice read_lattice_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_lattice_file: cannot open " + path);
  return read_lattice(is);
}

IsingPosteriorModel::IsingPosteriorModel(IsingLattice observed)
    : data_(std::move(observed)) {
  check_spins(data_);
}

double IsingPosteriorModel::log_f(const State& x, const ParamPoint& theta) const {
  return ising_log_f(x, to_ising_params(theta));
}

double IsingPosteriorModel::log_prior(const ParamPoint& theta) const {
  const IsingParams p = to_ising_params(theta);
  if (p.coupling <= 0.0 || p.coupling >= 1.0 || p.field <= -1.0 || p.field >= 1.0)
    return -std::numeric_limits<double>::infinity();
  return -std::log(2.0);  // uniform over (0,1) x (-1,1)
}

IsingPosteriorModel::State IsingPosteriorModel::exact_sample(
    const ParamPoint& theta, Rng& rng, WorkCounters& work) const {
  std::uint64_t updates = 0;
  IsingLattice draw = cftp_exact_sample(data_.width, data_.height,
                                        to_ising_params(theta), rng, nullptr, &updates);
  work.gibbs_updates += updates;
  return draw;
}

IsingPosteriorModel::State IsingPosteriorModel::bridge_transition(
    const State& x, const ParamPoint& theta_a, const ParamPoint& theta_b,
    double beta, Rng& rng, WorkCounters& work) const {
  IsingLattice next = bridged_gibbs_sweep(x, to_ising_params(theta_a),
                                          to_ising_params(theta_b), beta, rng);
  work.gibbs_updates += static_cast<std::uint64_t>(next.size());
  return next;
}

}  // namespace dimcmc
