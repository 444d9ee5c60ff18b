#include "doctest.h"

#include <cmath>
#include <vector>

#include "dimcmc/diagnostics.hpp"
#include "dimcmc/gaussian.hpp"
#include "dimcmc/ising.hpp"
#include "dimcmc/samplers.hpp"
#include "support/teststat.hpp"

using namespace dimcmc;

namespace {

ParamPoint scalar(double x) {
  ParamPoint p(1);
  p[0] = x;
  return p;
}

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

GaussianPrecisionModel unit_model() { return GaussianPrecisionModel(1.0, 1.0, vec({1.0})); }

// Deterministic proposal for hand-checked single steps.
struct FixedProposal {
  ParamPoint target;
  ParamPoint sample(const ParamPoint&, Rng&) const { return target; }
  double log_density(const ParamPoint&, const ParamPoint&) const { return 0.0; }
};
static_assert(ProposalDist<FixedProposal>);

// Minimal contract-satisfying model whose exact sampler fails on demand;
// used to check error propagation out of run_chain.
struct ExplodingModel {
  using State = Eigen::VectorXd;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(1);
  int fail_after = 3;
  mutable int calls = 0;

  Eigen::Index param_dim() const { return 1; }
  const State& data() const { return y; }
  double log_f(const State&, const ParamPoint&) const { return 0.0; }
  double log_prior(const ParamPoint&) const { return 0.0; }
  State exact_sample(const ParamPoint&, Rng&, WorkCounters&) const {
    if (calls++ >= fail_after) throw CftpBudgetError("synthetic budget exhaustion");
    return y;
  }
  State bridge_transition(const State& x, const ParamPoint&, const ParamPoint&, double,
                          Rng&, WorkCounters&) const {
    return x;
  }
};
static_assert(Model<ExplodingModel>);
static_assert(!ExactZModel<ExplodingModel>);
static_assert(!ExactZModel<IsingPosteriorModel>);

double gamma11_log_pdf(double theta) { return -theta; }  // Gamma(1,1), test-local

}  // namespace

TEST_CASE("proposal construction and symmetry") {
  CHECK_THROWS_AS(Proposal::random_walk(0.0), std::invalid_argument);
  CHECK_THROWS_AS(Proposal::random_walk(-0.1), std::invalid_argument);

  const Proposal q = Proposal::random_walk(0.37);
  Rng rng(1);
  const ParamPoint a = scalar(1.1);
  for (int rep = 0; rep < 20; ++rep) {
    const ParamPoint b = q.sample(a, rng);
    CHECK(proposal_log_ratio(q, a, b) == 0.0);
  }

  const Proposal post = Proposal::independent_posterior(GammaParams{1.5, 1.5});
  const ParamPoint b = scalar(2.0);
  CHECK(post.log_density(b, a) == doctest::Approx(gamma_log_pdf(2.0, GammaParams{1.5, 1.5})));
}

TEST_CASE("exact-z M-H accepts every posterior-proposal step") {
  const GaussianPrecisionModel m = unit_model();
  SamplerConfig cfg;
  cfg.algorithm = Algorithm::ExactZMh;
  cfg.proposal = Proposal::independent_posterior(m.posterior_params());
  cfg.iterations = 2000;
  cfg.initial_theta = scalar(1.0);
  cfg.seed = 7;
  const ChainTrace trace = run_chain(m, cfg);
  CHECK(acceptance_rate(trace) == 1.0);
}

TEST_CASE("exact-z M-H random-walk step reproduces the posterior log ratio") {
  const GaussianPrecisionModel m = unit_model();
  const FixedProposal q{scalar(2.0)};
  ParamPoint theta = scalar(1.0);
  Rng rng(3);
  WorkCounters work;
  const AcceptanceRecord rec = exact_z_mh_step(m, q, theta, rng, work);
  // log Gamma(1.5,1.5) pdf difference between 2 and 1, frozen from an
  // independent evaluation
  CHECK(rec.log_accept_ratio == doctest::Approx(-1.1534264097200273).epsilon(1e-13));

  const FixedProposal self{scalar(1.0)};
  ParamPoint th2 = scalar(1.0);
  const AcceptanceRecord rec2 = exact_z_mh_step(m, self, th2, rng, work);
  CHECK(rec2.log_accept_ratio == 0.0);
  CHECK(rec2.accepted);
}

TEST_CASE("exact-z long run matches the analytic posterior") {
  const GaussianPrecisionModel m = unit_model();
  SamplerConfig cfg;
  cfg.algorithm = Algorithm::ExactZMh;
  cfg.proposal = Proposal::random_walk(0.5);
  cfg.iterations = 100000;
  cfg.initial_theta = scalar(1.0);
  cfg.seed = 20240612;
  const ChainTrace trace = run_chain(m, cfg);

  const Eigen::VectorXd series = trace.theta_samples.col(0).tail(99000);
  const EssEstimate ess = effective_sample_size(series);
  const auto stride = static_cast<Eigen::Index>(std::ceil(ess.autocorrelation_time));
  std::vector<double> thinned;
  for (Eigen::Index i = 0; i < series.size(); i += stride) thinned.push_back(series[i]);
  Eigen::VectorXd tv = Eigen::Map<Eigen::VectorXd>(thinned.data(),
                                                   static_cast<Eigen::Index>(thinned.size()));
  const GammaParams post = m.posterior_params();
  const KsResult ks = ks_test(tv, [&](double x) { return gamma_cdf(x, post); });
  CHECK(ks.pass_at_0p01);
}

TEST_CASE("savm auxiliary ratio cancels exactly for an unchanged state") {
  const GaussianPrecisionModel m = unit_model();
  const ParamPoint theta = scalar(1.3);
  const ParamPoint hat = scalar(0.7);
  const Eigen::VectorXd x = vec({0.4});
  CHECK(savm_aux_log_ratio(m, hat, theta, x, theta, x) == 0.0);

  // same theta but a fresh auxiliary draw: rejections become possible
  const Eigen::VectorXd xp = vec({0.9});
  CHECK(savm_aux_log_ratio(m, hat, theta, x, theta, xp) != 0.0);
}

TEST_CASE("savm step log ratio matches a factor-by-factor evaluation") {
  const GaussianPrecisionModel m = unit_model();
  // theta=1, theta'=2, theta_hat=1, x=[0.5], x'=[0.2], posterior proposal;
  // frozen from an independent per-factor script
  const Proposal q = Proposal::independent_posterior(m.posterior_params());
  const double got =
      target_log_ratio(m, scalar(1.0), scalar(2.0)) +
      proposal_log_ratio(q, scalar(1.0), scalar(2.0)) +
      savm_aux_log_ratio(m, scalar(1.0), scalar(1.0), vec({0.5}), scalar(2.0), vec({0.2}));
  CHECK(got == doctest::Approx(-0.3265735902799727).epsilon(1e-13));
}

TEST_CASE("mavm with matching parameters accepts with unit ratio") {
  const GaussianPrecisionModel m = unit_model();
  const ParamPoint theta = scalar(1.1);
  const BridgeSchedule sched = default_beta_schedule(3);
  std::vector<Eigen::VectorXd> ensemble{vec({0.2}), vec({-0.4}), vec({0.9}), vec({0.1})};
  std::vector<Eigen::VectorXd> proposed{vec({1.2}), vec({0.3}), vec({-0.8}), vec({0.5})};
  const double aux = mavm_aux_log_ratio<GaussianPrecisionModel>(
      m, theta, sched, theta, {ensemble.data(), ensemble.size()}, theta,
      {proposed.data(), proposed.size()});
  CHECK(aux == 0.0);
}

TEST_CASE("mavm K=2 step matches a term-by-term evaluation of the bridge product") {
  const GaussianPrecisionModel m = unit_model();
  const ParamPoint theta = scalar(1.2);
  const ParamPoint hat = scalar(0.8);
  const BridgeSchedule sched = default_beta_schedule(2);
  const Proposal q = Proposal::random_walk(0.5);

  // fixed current ensemble
  std::vector<Eigen::VectorXd> ensemble{vec({0.3}), vec({-0.6}), vec({1.1})};

  // replay the step's generation order: proposal, exact sample, bridging
  // transitions k = K..1
  WorkCounters scratch;
  Rng replay(9001);
  const ParamPoint theta_p = q.sample(theta, replay);
  REQUIRE(theta_p[0] > 0.0);
  std::vector<Eigen::VectorXd> proposed(3);
  proposed[2] = m.exact_sample(theta_p, replay, scratch);
  proposed[1] = m.bridge_transition(proposed[2], hat, theta_p, sched.betas[2], replay, scratch);
  proposed[0] = m.bridge_transition(proposed[1], hat, theta_p, sched.betas[1], replay, scratch);

  // independent evaluation
  auto lf = [](const Eigen::VectorXd& x, double th) { return -0.5 * th * x.squaredNorm(); };
  auto fk = [&](const Eigen::VectorXd& x, double th, int k) {
    const double beta = (2.0 - k + 1.0) / 3.0;  // K = 2
    return beta * lf(x, 0.8) + (1.0 - beta) * lf(x, th);
  };
  double aux = 0.0;
  for (int k = 0; k <= 2; ++k) {
    aux += fk(proposed[static_cast<std::size_t>(k)], theta_p[0], k) -
           fk(proposed[static_cast<std::size_t>(k)], theta_p[0], k + 1);
    aux += fk(ensemble[static_cast<std::size_t>(k)], theta[0], k + 1) -
           fk(ensemble[static_cast<std::size_t>(k)], theta[0], k);
  }
  const double target = (gamma11_log_pdf(theta_p[0]) + lf(vec({1.0}), theta_p[0])) -
                        (gamma11_log_pdf(theta[0]) + lf(vec({1.0}), theta[0]));
  const double expected = target + aux;

  Rng rng(9001);
  ParamPoint th = theta;
  std::vector<Eigen::VectorXd> ens = ensemble;
  WorkCounters work;
  const AcceptanceRecord rec = mavm_step(m, hat, sched, q, th, ens, rng, work);
  CHECK(rec.log_accept_ratio == doctest::Approx(expected).epsilon(1e-12));
  CHECK(work.exact_samples_drawn == 1);
  CHECK(work.bridge_steps == 2);
}

TEST_CASE("mavm K=0 reduces to savm bitwise at the step level") {
  const GaussianPrecisionModel m = unit_model();
  const ParamPoint hat = scalar(0.9);
  const BridgeSchedule sched = default_beta_schedule(0);
  const Proposal q = Proposal::random_walk(0.5);

  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    Rng init(seed * 13);
    WorkCounters scratch;
    const Eigen::VectorXd aux0 = m.exact_sample(hat, init, scratch);

    ParamPoint th_s = scalar(1.0);
    ParamPoint th_m = scalar(1.0);
    Eigen::VectorXd aux_s = aux0;
    std::vector<Eigen::VectorXd> ens{aux0};
    Rng rs(seed);
    Rng rm(seed);
    WorkCounters ws;
    WorkCounters wm;
    const AcceptanceRecord rec_s = savm_step(m, hat, q, th_s, aux_s, rs, ws);
    const AcceptanceRecord rec_m = mavm_step(m, hat, sched, q, th_m, ens, rm, wm);

    CHECK(rec_s.log_accept_ratio == rec_m.log_accept_ratio);
    CHECK(rec_s.accepted == rec_m.accepted);
    CHECK(th_s == th_m);
    CHECK(aux_s == ens[0]);
    CHECK(rs() == rm());  // generator streams stayed aligned
  }
}

TEST_CASE("exchange step is exact and self-transitions accept with ratio zero") {
  const GaussianPrecisionModel m = unit_model();
  Rng rng(11);
  WorkCounters work;

  // theta = 1, theta' = 2, w = [0.5], y = [1]: all factors dyadic
  ParamPoint theta = scalar(1.0);
  CHECK(exchange_aux_log_ratio(m, scalar(1.0), scalar(2.0), vec({0.5})) == 0.125);
  CHECK(target_log_ratio(m, scalar(1.0), scalar(2.0)) == -1.5);

  const FixedProposal self{scalar(1.0)};
  const AcceptanceRecord rec = exchange_step(m, self, theta, rng, work);
  CHECK(rec.log_accept_ratio == 0.0);
  CHECK(rec.accepted);
}

TEST_CASE("bridged exchange with a degenerate proposal accepts for any K") {
  const GaussianPrecisionModel m = unit_model();
  const FixedProposal self{scalar(1.4)};
  for (int levels : {0, 1, 4, 9}) {
    const BridgeSchedule sched = default_beta_schedule(levels);
    ParamPoint theta = scalar(1.4);
    Rng rng(13);
    WorkCounters work;
    const AcceptanceRecord rec = exchange_bridged_step(m, sched, self, theta, rng, work);
    CHECK(rec.log_accept_ratio == 0.0);
    CHECK(rec.accepted);
  }
}

TEST_CASE("bridged exchange K=0 reduces to exchange bitwise at the step level") {
  const GaussianPrecisionModel m = unit_model();
  const BridgeSchedule sched = default_beta_schedule(0);
  const Proposal q = Proposal::random_walk(0.5);

  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    ParamPoint th_e = scalar(1.0);
    ParamPoint th_b = scalar(1.0);
    Rng re(seed);
    Rng rb(seed);
    WorkCounters we;
    WorkCounters wb;
    const AcceptanceRecord rec_e = exchange_step(m, q, th_e, re, we);
    const AcceptanceRecord rec_b = exchange_bridged_step(m, sched, q, th_b, rb, wb);
    CHECK(rec_e.log_accept_ratio == rec_b.log_accept_ratio);
    CHECK(rec_e.accepted == rec_b.accepted);
    CHECK(th_e == th_b);
    CHECK(re() == rb());
  }
}

TEST_CASE("bridged exchange K=4 on ising matches a term-by-term evaluation") {
  Rng data_rng(404);
  const IsingLattice data = cftp_exact_sample(4, 4, IsingParams{0.3, 0.0}, data_rng);
  const IsingPosteriorModel m(data);

  ParamPoint theta(2);
  theta << 0.35, 0.05;
  const BridgeSchedule sched = default_beta_schedule(4);
  const Proposal q = Proposal::random_walk(0.05);

  // independent log f: neighbour enumeration from the test oracle
  auto local_logf = [&](const IsingLattice& L, double coupling, double field) {
    double edges = 0.0;
    double sites = 0.0;
    for (int site = 0; site < L.size(); ++site) {
      sites += L.spins[site];
      for (int n : teststat::torus_neighbours(L.width, L.height, site))
        edges += L.spins[site] * L.spins[n];
    }
    return coupling * edges / 2.0 + field * sites;
  };

  // replay the generation: proposal, exact draw at theta', bridge k = 1..K
  Rng replay(777);
  WorkCounters scratch;
  const ParamPoint theta_p = q.sample(theta, replay);
  REQUIRE(theta_p[0] > 0.0);
  REQUIRE(theta_p[0] < 1.0);
  REQUIRE(std::fabs(theta_p[1]) < 1.0);
  std::vector<IsingLattice> xs(5);
  xs[0] = m.exact_sample(theta_p, replay, scratch);
  for (int k = 1; k <= 4; ++k)
    xs[static_cast<std::size_t>(k)] = m.bridge_transition(
        xs[static_cast<std::size_t>(k - 1)], theta_p, theta, sched.betas[k], replay, scratch);

  auto fk = [&](const IsingLattice& x, int k) {
    const double beta = (4.0 - k + 1.0) / 5.0;
    return beta * local_logf(x, theta_p[0], theta_p[1]) +
           (1.0 - beta) * local_logf(x, theta[0], theta[1]);
  };
  double aux = 0.0;
  for (int k = 0; k <= 4; ++k)
    aux += fk(xs[static_cast<std::size_t>(k)], k + 1) - fk(xs[static_cast<std::size_t>(k)], k);
  const double target = local_logf(data, theta_p[0], theta_p[1]) -
                        local_logf(data, theta[0], theta[1]);  // uniform prior cancels
  const double expected = target + aux;

  Rng rng(777);
  ParamPoint th = theta;
  WorkCounters work;
  const AcceptanceRecord rec = exchange_bridged_step(m, sched, q, th, rng, work);
  CHECK(rec.log_accept_ratio == doctest::Approx(expected).epsilon(1e-11));
  CHECK(work.bridge_steps == 4);
}

TEST_CASE("exchange long run matches the analytic posterior") {
  const GaussianPrecisionModel m = unit_model();
  SamplerConfig cfg;
  cfg.algorithm = Algorithm::Exchange;
  cfg.proposal = Proposal::random_walk(0.5);
  cfg.iterations = 100000;
  cfg.initial_theta = scalar(1.0);
  cfg.seed = 31415;
  const ChainTrace trace = run_chain(m, cfg);

  const Eigen::VectorXd series = trace.theta_samples.col(0).tail(99000);
  const EssEstimate ess = effective_sample_size(series);
  const auto stride = static_cast<Eigen::Index>(std::ceil(ess.autocorrelation_time));
  std::vector<double> thinned;
  for (Eigen::Index i = 0; i < series.size(); i += stride) thinned.push_back(series[i]);
  Eigen::VectorXd tv = Eigen::Map<Eigen::VectorXd>(thinned.data(),
                                                   static_cast<Eigen::Index>(thinned.size()));
  const GammaParams post = m.posterior_params();
  const KsResult ks = ks_test(tv, [&](double x) { return gamma_cdf(x, post); });
  CHECK(ks.pass_at_0p01);
}

TEST_CASE("run_chain validates its configuration") {
  const GaussianPrecisionModel m = unit_model();
  SamplerConfig cfg;
  cfg.algorithm = Algorithm::Exchange;
  cfg.proposal = Proposal::random_walk(0.5);
  cfg.iterations = 10;
  cfg.initial_theta = scalar(1.0);

  SamplerConfig bad = cfg;
  bad.iterations = 0;
  CHECK_THROWS_AS(run_chain(m, bad), std::invalid_argument);

  bad = cfg;
  bad.initial_theta = scalar(-1.0);  // outside prior support
  CHECK_THROWS_AS(run_chain(m, bad), std::invalid_argument);

  bad = cfg;
  bad.theta_hat = scalar(1.0);  // exchange takes no theta_hat
  CHECK_THROWS_AS(run_chain(m, bad), std::invalid_argument);

  bad = cfg;
  bad.algorithm = Algorithm::Savm;  // savm requires theta_hat
  CHECK_THROWS_AS(run_chain(m, bad), std::invalid_argument);

  bad = cfg;
  bad.bridge_levels = -1;
  CHECK_THROWS_AS(run_chain(m, bad), std::invalid_argument);

  // exact-z needs the normalizer, which the ising contract does not expose
  Rng rng(5);
  const IsingPosteriorModel ising(cftp_exact_sample(3, 3, IsingParams{0.2, 0.0}, rng));
  SamplerConfig icfg;
  icfg.algorithm = Algorithm::ExactZMh;
  icfg.proposal = Proposal::random_walk(0.1);
  icfg.iterations = 10;
  icfg.initial_theta = vec({0.5, 0.0});
  CHECK_THROWS_AS(run_chain(ising, icfg), std::invalid_argument);
}

TEST_CASE("run_chain is deterministic per seed and counts its work") {
  const GaussianPrecisionModel m = unit_model();
  SamplerConfig cfg;
  cfg.algorithm = Algorithm::Exchange;
  cfg.proposal = Proposal::independent_posterior(m.posterior_params());
  cfg.iterations = 10000;
  cfg.initial_theta = scalar(1.0);
  cfg.seed = 99;

  const ChainTrace a = run_chain(m, cfg);
  const ChainTrace b = run_chain(m, cfg);
  CHECK(a.theta_samples == b.theta_samples);
  CHECK(a.accept_flags == b.accept_flags);
  CHECK(a.counters.exact_samples_drawn == b.counters.exact_samples_drawn);

  const double rate = acceptance_rate(a);
  CHECK(rate > 0.0);
  CHECK(rate < 1.0);
  CHECK(a.counters.exact_samples_drawn == 10000);
  CHECK(a.counters.prior_rejects == 0);
}

TEST_CASE("proposals without prior support are rejected before exact sampling") {
  const GaussianPrecisionModel m = unit_model();
  SamplerConfig cfg;
  cfg.algorithm = Algorithm::Exchange;
  cfg.proposal = Proposal::random_walk(5.0);  // frequently proposes theta <= 0
  cfg.iterations = 5000;
  cfg.initial_theta = scalar(0.1);
  cfg.seed = 12;
  const ChainTrace trace = run_chain(m, cfg);
  CHECK(trace.counters.prior_rejects > 0);
  CHECK(trace.counters.exact_samples_drawn + trace.counters.prior_rejects == 5000);
}

TEST_CASE("savm and mavm count their initialization draws as work, not proposals") {
  const GaussianPrecisionModel m = unit_model();
  SamplerConfig cfg;
  cfg.algorithm = Algorithm::Mavm;
  cfg.bridge_levels = 3;
  cfg.theta_hat = scalar(1.0);
  cfg.proposal = Proposal::independent_posterior(m.posterior_params());
  cfg.iterations = 50;
  cfg.initial_theta = scalar(1.0);
  cfg.seed = 4;
  const ChainTrace trace = run_chain(m, cfg);
  CHECK(trace.counters.exact_samples_drawn == 50);
  // 3 initialization transitions plus 3 per step
  CHECK(trace.counters.bridge_steps == 3 + 50 * 3);
}

TEST_CASE("step failures surface with the iteration index attached") {
  const ExplodingModel m;
  SamplerConfig cfg;
  cfg.algorithm = Algorithm::Exchange;
  cfg.proposal = Proposal::random_walk(0.5);
  cfg.iterations = 10;
  cfg.initial_theta = scalar(0.0);
  cfg.seed = 8;
  try {
    run_chain(m, cfg);
    FAIL("expected a ChainError");
  } catch (const ChainError& e) {
    CHECK(e.iteration() == 3);
    CHECK(std::string(e.what()).find("synthetic budget exhaustion") != std::string::npos);
  }
}

TEST_CASE("a single-step chain records exactly one sample") {
  const GaussianPrecisionModel m = unit_model();
  SamplerConfig cfg;
  cfg.algorithm = Algorithm::Exchange;
  cfg.proposal = Proposal::independent_posterior(m.posterior_params());
  cfg.iterations = 1;
  cfg.initial_theta = scalar(1.0);
  cfg.seed = 2;
  const ChainTrace trace = run_chain(m, cfg);
  CHECK(trace.theta_samples.rows() == 1);
  CHECK(trace.accept_flags.size() == 1);
}

TEST_CASE("run_chain on the ising model replays per seed") {
  Rng data_rng(1001);
  const IsingLattice data = cftp_exact_sample(3, 3, IsingParams{0.3, 0.0}, data_rng);
  const IsingPosteriorModel m(data);

  SamplerConfig cfg;
  cfg.algorithm = Algorithm::ExchangeBridged;
  cfg.bridge_levels = 2;
  cfg.proposal = Proposal::random_walk(0.05);
  cfg.iterations = 40;
  cfg.initial_theta = vec({0.3, 0.0});
  cfg.seed = 1234;

  const ChainTrace a = run_chain(m, cfg);
  const ChainTrace b = run_chain(m, cfg);
  CHECK(a.theta_samples == b.theta_samples);
  CHECK(a.counters.gibbs_updates == b.counters.gibbs_updates);
  CHECK(a.counters.gibbs_updates > 0);
}
