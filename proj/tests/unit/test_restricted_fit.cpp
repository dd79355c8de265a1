#include <cmath>
#include <random>

#include "doctest.h"
#include "sbvm/error.hpp"
#include "sbvm/restricted_fit.hpp"

using namespace sbvm;

namespace {

struct Fixture {
  GlmFamily family;
  GroupedDesign design;
  Vector tau;
  Vector y;
  Vector beta0;

  Fixture(GlmFamily f, int n, std::uint64_t seed) : family(f) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Matrix x(n, 4);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 4; ++j) x(i, j) = z(rng);
    design = GroupedDesign(x, {1, 2, 1});
    tau = Vector::Constant(n, family.discrete() ? 1.0 : 0.9);
    beta0 = Vector::Zero(4);
    beta0(0) = 0.6;
    beta0(3) = -0.4;
    y.resize(n);
    const Vector eta = design.x() * beta0;
    for (int i = 0; i < n; ++i) y(i) = family.sample(eta(i), tau(i), rng);
  }
};

}  // namespace

TEST_CASE("restricted MLE solves the score equation") {
  for (GlmFamily f : {GlmFamily::gaussian(), GlmFamily::logistic(), GlmFamily::poisson(), GlmFamily::probit(),
                      GlmFamily::gamma_log(), GlmFamily::negbin_log(4.0)}) {
    Fixture fx(f, 300, 7);
    const RestrictedModel m(fx.family, fx.design, fx.tau, fx.y, {0, 2});
    const FitResult fit = restricted_mle(m, Vector::Zero(2));
    CHECK(fit.converged);
    CHECK(fit.info_pd);
    CHECK(m.loglik_grad_hess(fit.beta_hat).g.norm() < 1e-7 * (1.0 + std::abs(fit.loglik)));
    // Newton trace never decreases.
    for (std::size_t k = 1; k < fit.trace.size(); ++k) CHECK(fit.trace[k] >= fit.trace[k - 1] - 1e-10);
  }
}

TEST_CASE("gaussian restricted MLE is least squares") {
  Fixture fx(GlmFamily::gaussian(), 100, 2);
  const RestrictedModel m(fx.family, fx.design, fx.tau, fx.y, {1});
  const FitResult fit = restricted_mle(m, Vector::Zero(2));
  const Matrix xs = fx.design.columns({1});
  const Vector ls = (xs.transpose() * xs).ldlt().solve(xs.transpose() * fx.y);
  CHECK((fit.beta_hat - ls).norm() < 1e-9);
}

TEST_CASE("empty support") {
  Fixture fx(GlmFamily::poisson(), 50, 3);
  const RestrictedModel m(fx.family, fx.design, fx.tau, fx.y, {});
  CHECK(m.dim() == 0);
  CHECK(std::isfinite(m.loglik(Vector())));
}

TEST_CASE("separated logistic data are flagged") {
  Matrix x(20, 1);
  Vector y(20);
  for (int i = 0; i < 20; ++i) {
    x(i, 0) = i < 10 ? -1.0 - i : 1.0 + i;
    y(i) = i < 10 ? 0.0 : 1.0;
  }
  const GroupedDesign d(x, {1});
  const GlmFamily f = GlmFamily::logistic();
  const Vector tau = Vector::Ones(20);
  const RestrictedModel m(f, d, tau, y, {0});
  const FitResult fit = restricted_mle(m, Vector::Zero(1));
  CHECK(fit.separated);
}

TEST_CASE("ellipsoid constraint is respected") {
  Fixture fx(GlmFamily::gaussian(), 100, 4);
  const RestrictedModel m(fx.family, fx.design, fx.tau, fx.y, {0});
  Ellipsoid e{Vector::Zero(1), Matrix::Identity(1, 1), 0.1};
  const FitResult fit = restricted_mle(m, Vector::Zero(1), &e);
  CHECK(fit.beta_hat.norm() <= 0.1 + 1e-9);
  CHECK(fit.boundary_hit);
}

TEST_CASE("pseudo-true center on a correct support recovers the truth") {
  Fixture fx(GlmFamily::poisson(), 200, 5);
  const PopulationCenter c = pseudo_true_center(fx.family, fx.design, fx.tau, {0, 2}, fx.beta0);
  CHECK(c.converged);
  CHECK(c.beta_circ(0) == doctest::Approx(0.6).epsilon(1e-8));
  CHECK(c.beta_circ(1) == doctest::Approx(-0.4).epsilon(1e-8));
  const RestrictedModel m(fx.family, fx.design, fx.tau, fx.y, {0, 2});
  CHECK((c.fisher_circ - m.expected_information(c.beta_circ)).norm() < 1e-8);
  // The LAN remainder vanishes for the gaussian family.
  Fixture g(GlmFamily::gaussian(), 100, 6);
  const RestrictedModel mg(g.family, g.design, g.tau, g.y, {0, 1});
  const PopulationCenter cg = pseudo_true_center(g.family, g.design, g.tau, {0, 1}, g.beta0);
  Vector h(3);
  h << 0.5, -1.0, 2.0;
  CHECK(lan_remainder(mg, cg, h) < 1e-8);
}

TEST_CASE("Schur projection identity on random instances") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z;
  for (int t = 0; t < 100; ++t) {
    const int p = 2 + t % 6, p0 = 1 + t % (p - 1);
    Matrix a(p, p);
    Vector g(p);
    for (int i = 0; i < p; ++i) {
      g(i) = z(rng);
      for (int j = 0; j < p; ++j) a(i, j) = z(rng);
    }
    const SchurProjection s = schur_projection(a * a.transpose() + Matrix::Identity(p, p), g, p0);
    CHECK(s.excess == doctest::Approx(s.direct).epsilon(1e-10));
    CHECK(s.excess >= -1e-12);
  }
  CHECK_THROWS_AS(schur_projection(Matrix::Zero(2, 2), Vector::Ones(2), 1), SingularMatrix);
}
