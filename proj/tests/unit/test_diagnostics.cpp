#include <cmath>
#include <memory>
#include <random>

#include "doctest.h"
#include "sbvm/diagnostics.hpp"
#include "sbvm/error.hpp"

using namespace sbvm;

namespace {

ComponentLaw gaussian_component(Support s, double w, Vector mean, Matrix prec) {
  ComponentLaw c;
  c.support = std::move(s);
  c.weight = w;
  c.mean = mean;
  c.precision = prec;
  c.log_density = [mean, prec](const Vector& x) { return log_gaussian_density(x, mean, prec); };
  return c;
}

ComponentLaw unit_normal(Support s, double w, double shift, int dim = 1) {
  Vector m = Vector::Zero(dim);
  m(0) = shift;
  return gaussian_component(std::move(s), w, m, Matrix::Identity(dim, dim));
}

Simulation small_sim(GlmFamily f, int n, int g, Support truth, double value, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Matrix x(n, g);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < g; ++j) x(i, j) = z(rng);
  Simulation sim;
  sim.family = f;
  sim.design = GroupedDesign(x, std::vector<int>(g, 1));
  sim.tau = Vector::Ones(n);
  sim.truth.support = truth;
  sim.truth.values = Vector::Constant(static_cast<int>(truth.size()), value);
  return sim;
}

// 2 Phi(1/2) - 1
constexpr double kTvUnitShift = 0.38292492254802624;

}  // namespace

TEST_CASE("TV between shifted unit normals") {
  const MixtureLaw a = {unit_normal({0}, 1.0, 0.0)};
  const MixtureLaw b = {unit_normal({0}, 1.0, 1.0)};
  const TvEstimate tv = tv_between_support_mixtures(a, b);
  CHECK(tv.method == TvMethod::per_support_quadrature);
  CHECK(tv.value == doctest::Approx(kTvUnitShift).epsilon(1e-8));

  TvOptions opt;
  opt.mc_draws = 40000;
  const TvEstimate tv2 =
      tv_between_support_mixtures({unit_normal({0, 1}, 1.0, 0.0, 2)}, {unit_normal({0, 1}, 1.0, 1.0, 2)}, opt);
  CHECK(tv2.method == TvMethod::mc);
  CHECK(std::abs(tv2.value - kTvUnitShift) < 4 * tv2.se + 1e-3);
}

TEST_CASE("TV singular parts") {
  const MixtureLaw a = {unit_normal({0}, 1.0, 0.0)};
  const MixtureLaw b = {unit_normal({1}, 1.0, 0.0)};
  CHECK(tv_between_support_mixtures(a, b).value == doctest::Approx(1.0));
  // Same laws, weights moved between two supports.
  const MixtureLaw c = {unit_normal({0}, 0.7, 0.0), unit_normal({1}, 0.3, 0.0)};
  const MixtureLaw d = {unit_normal({0}, 0.4, 0.0), unit_normal({1}, 0.6, 0.0)};
  const TvEstimate tv = tv_between_support_mixtures(c, d);
  CHECK(tv.value == doctest::Approx(0.3).epsilon(1e-8));
  // Point mass at the empty support.
  ComponentLaw empty;
  empty.weight = 0.5;
  const MixtureLaw e = {empty, unit_normal({0}, 0.5, 0.0)};
  CHECK(tv_between_support_mixtures(e, a).value == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("TV is symmetric and satisfies the triangle inequality") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.5, 1.5), w(0.1, 0.9);
  for (int t = 0; t < 20; ++t) {
    auto law = [&] {
      const double p = w(rng);
      return MixtureLaw{unit_normal({0}, p, u(rng)), unit_normal({1}, 1 - p, u(rng))};
    };
    const MixtureLaw a = law(), b = law(), c = law();
    const double ab = tv_between_support_mixtures(a, b).value;
    CHECK(ab == doctest::Approx(tv_between_support_mixtures(b, a).value).epsilon(1e-9));
    CHECK(ab <= tv_between_support_mixtures(a, c).value + tv_between_support_mixtures(c, b).value + 1e-9);
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0 + 1e-12);
  }
}

TEST_CASE("oracle credible set radius") {
  OracleLaw law;
  law.support = {0};
  law.mean = Vector::Zero(1);
  law.covariance = Matrix::Identity(1, 1);
  law.precision = Matrix::Identity(1, 1);
  const CredibleSet cs = oracle_credible_set(law, 0.95);
  CHECK(std::sqrt(cs.chi2_quantile) == doctest::Approx(1.959963984540054).epsilon(1e-10));
  GroupedDesign d(Matrix::Identity(3, 3), {1, 1, 1});
  Vector b = Vector::Zero(3);
  b(0) = 1.95;
  CHECK(contains(d, cs, b));
  b(0) = 1.97;
  CHECK_FALSE(contains(d, cs, b));
  b(0) = 0.0;
  b(1) = 0.1;  // off the set's support
  CHECK_FALSE(contains(d, cs, b));
}

TEST_CASE("plug-in set is centered at the restricted MLE") {
  const Simulation sim = small_sim(GlmFamily::logistic(), 300, 3, {0}, 0.8, 4);
  std::mt19937_64 rng(5);
  const Dataset data = sim.draw(rng);
  const CredibleSet cs = plugin_credible_set(data, 0.5, {0}, 0.9);
  CHECK_FALSE(cs.fallback);
  Vector b = Vector::Zero(3);
  b(0) = cs.center(0);
  CHECK(quadratic_form(data.design, cs, b) == doctest::Approx(0.0));
  CHECK(cs.chi2_quantile == doctest::Approx(chi2_quantile(1, 0.9)));
}

TEST_CASE("pivotal coverage with the true support") {
  const Simulation sim = small_sim(GlmFamily::gaussian(), 200, 3, {0, 1}, 0.5, 6);
  const SasPrior prior(SizePrior::complexity(3, 1.0, 1.0), Slab::gaussian(1.0), {1, 1, 1});
  CoverageOptions opt;
  opt.fix_support = true;
  opt.level = 0.9;
  const CoverageResult r = coverage_experiment(sim, prior, 1.0, EngineSettings{2, {}}, opt, 600, 7);
  CHECK(std::abs(r.coverage - 0.9) <= 3 * std::sqrt(0.09 / r.used));
  CHECK(std::isnan(r.credibility_gap));
  CHECK_THROWS_AS(coverage_experiment(sim, prior, 1.0, EngineSettings{2, {}}, opt, 100, 7), DomainError);
}

TEST_CASE("gaussian Hellinger affinity closed form") {
  const GlmFamily g = GlmFamily::gaussian();
  Vector eta(2), eta0(2), tau(2);
  eta << 1.0, -0.5;
  eta0 << 0.0, 0.5;
  tau << 1.0, 2.0;
  // 2 (1 - exp(-(d^2) / (8 tau)))
  const double h1 = 2 * (1 - std::exp(-1.0 / 8.0)), h2 = 2 * (1 - std::exp(-1.0 / 16.0));
  CHECK(average_hellinger_sq(g, eta, eta0, tau) == doctest::Approx(0.5 * (h1 + h2)).epsilon(1e-12));
}

TEST_CASE("normalized score has identity covariance for every family") {
  for (GlmFamily f : {GlmFamily::gaussian(), GlmFamily::logistic(), GlmFamily::poisson(), GlmFamily::probit(),
                      GlmFamily::gamma_log(), GlmFamily::negbin_log(3.0)}) {
    Simulation sim = small_sim(f, 1000, 3, {0, 2}, 0.3, 8);
    const PopulationCenter c = pseudo_true_center(sim.family, sim.design, sim.tau, {0, 2}, sim.truth_ambient());
    std::mt19937_64 rng(9);
    const int reps = 3000;
    Matrix cov = Matrix::Zero(2, 2);
    Vector mean = Vector::Zero(2);
    for (int r = 0; r < reps; ++r) {
      const Dataset d = sim.draw(rng);
      const RestrictedModel m(d.family, d.design, d.tau, d.y, {0, 2});
      const Vector z = normalized_score(m, c);
      mean += z;
      cov += z * z.transpose();
    }
    mean /= reps;
    cov /= reps;
    CAPTURE(f.name());
    CHECK(mean.norm() < 0.1);
    CHECK((cov - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.12);
  }
}

TEST_CASE("gaussian score mgf constant") {
  // log E exp(lambda u^T Z) = lambda^2 / 2 for every direction.
  const Simulation sim = small_sim(GlmFamily::gaussian(), 200, 4, {1}, 0.5, 10);
  CHECK(estimate_b_mgf(sim, 2, 4, 1) == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("gaussian score envelope chi-square check") {
  const Simulation sim = small_sim(GlmFamily::gaussian(), 100, 5, {0, 3}, 0.5, 11);
  const ScoreEnvelopeResult r = score_envelope_experiment(sim, 2, 20000, 12);
  CHECK(r.check_analytic == doctest::Approx(0.01));
  CHECK(std::abs(r.check_empirical - 0.01) < 4 * r.check_se);
  CHECK(r.exceedance <= r.bound + 3 * r.se);
}

TEST_CASE("Renyi objective vanishes at the truth and the p=1 grid agrees") {
  // Poisson with an intercept column and one noise column.
  Simulation sim = small_sim(GlmFamily::poisson(), 300, 2, {0}, std::log(4.0), 13);
  Matrix x = sim.design.x();
  x.col(0).setOnes();
  sim.design = GroupedDesign(x, {1, 1});
  CHECK(std::abs(renyi_objective(sim, 0.5, {0}, sim.truth.values)) < 1e-14);
  const RenyiTable t = renyi_separation(sim, 0.5, 2);
  CHECK(t.entries.size() == 2);  // {} and {1}
  for (const auto& e : t.entries) {
    CHECK(e.r > 0.0);
    if (e.grid_r >= 0.0) CHECK(std::abs(e.r - e.grid_r) < 1e-6);
  }
  // Empty support: J at eta = 0 against eta0 = log 4.
  const double j0 = GlmFamily::poisson().renyi_gap(0.5, 0.0, std::log(4.0), 1.0);
  CHECK(t.entries[0].r == doctest::Approx(j0).epsilon(1e-10));
}

TEST_CASE("assumption audit produces the documented rows") {
  const Simulation sim = small_sim(GlmFamily::logistic(), 200, 5, {1, 3}, 1.0, 14);
  const SasPrior prior(SizePrior::complexity(5, 1.0, 1.0), Slab::gaussian(1.0), std::vector<int>(5, 1));
  AuditOptions opt;
  opt.renyi_s_max = 1;
  opt.prior_mc = 2000;
  opt.sieve_mc = 2000;
  const DiagnosticsReport rep = assumption_audit(sim, prior, opt);
  for (const char* name : {"eps_n", "phi2", "kappa_n0", "zeta_variance_dev", "a_pi", "b_mgf", "renyi_min"})
    CHECK(rep.find(name) != nullptr);
  CHECK(rep.find("zeta_variance_dev")->value < 1e-8);
  CHECK(rep.find("eps_n")->value == doctest::Approx(std::sqrt(2 * std::log(5.0) / 200)));
}
