#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "sbvm/error.hpp"
#include "sbvm/glm_family.hpp"
#include "sbvm/numeric.hpp"

using namespace sbvm;

namespace {

std::vector<GlmFamily> families() {
  return {GlmFamily::gaussian(), GlmFamily::logistic(), GlmFamily::poisson(),
          GlmFamily::probit(),   GlmFamily::gamma_log(), GlmFamily::negbin_log(3.0)};
}

}  // namespace

TEST_CASE("names round-trip") {
  for (const auto& f : families()) CHECK(parse_family_kind(to_string(f.kind())) == f.kind());
  CHECK_THROWS(parse_family_kind("cauchy"));
}

TEST_CASE("mean and variance agree with the cumulant") {
  for (const auto& f : families()) {
    for (double eta : {-1.0, 0.0, 0.7}) {
      const double tau = f.discrete() ? 1.0 : 1.3;
      const Cumulant c = f.cumulant(f.theta(eta));
      CHECK(f.mean(eta) == doctest::Approx(c.b1).epsilon(1e-12));
      CHECK(f.variance(eta, tau) == doctest::Approx(tau * c.b2).epsilon(1e-12));
      const double m1 = f.expectation(eta, tau, [](double y) { return y; });
      CHECK(m1 == doctest::Approx(f.mean(eta)).epsilon(1e-9));
      const double mu = f.mean(eta);
      const double v = f.expectation(eta, tau, [mu](double y) { return (y - mu) * (y - mu); });
      CHECK(v == doctest::Approx(f.variance(eta, tau)).epsilon(1e-8));
    }
  }
}

TEST_CASE("closed-form spot values") {
  CHECK(GlmFamily::logistic().mean(0.0) == 0.5);
  CHECK(GlmFamily::poisson().mean(std::log(4.0)) == doctest::Approx(4.0));
  CHECK(GlmFamily::probit().mean(0.0) == doctest::Approx(0.5));
  CHECK(GlmFamily::gamma_log().mean(0.3) == doctest::Approx(std::exp(0.3)));
  CHECK(GlmFamily::negbin_log(2.0).mean(0.3) == doctest::Approx(std::exp(0.3)));
  // Gaussian J_alpha = alpha (1 - alpha) (eta - eta0)^2 / (2 tau).
  CHECK(GlmFamily::gaussian().renyi_gap(0.3, 1.0, -1.0, 2.0) == doctest::Approx(0.3 * 0.7 * 4.0 / 4.0));
  // Poisson fisher weight at mu = e^eta is mu.
  CHECK(GlmFamily::poisson().fisher_weight(0.4, 1.0) == doctest::Approx(std::exp(0.4)));
}

TEST_CASE("Renyi gap is nonnegative and vanishes at eta = eta0") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0), a(0.05, 0.95);
  for (const auto& f : families()) {
    for (int t = 0; t < 200; ++t) {
      const double eta = u(rng), eta0 = u(rng), alpha = a(rng);
      const double tau = f.discrete() ? 1.0 : 0.8;
      CHECK(f.renyi_gap(alpha, eta, eta0, tau) >= -1e-14);
      CHECK(std::abs(f.renyi_gap(alpha, eta0, eta0, tau)) < 1e-12);
      const double h2 = f.hellinger_sq(eta, eta0, tau);
      CHECK(h2 >= 0.0);
      CHECK(h2 <= 2.0);
    }
  }
}

TEST_CASE("centered log mgf") {
  // Gaussian: t^2 tau / 2.
  CHECK(GlmFamily::gaussian().centered_log_mgf(0.5, 2.0, 0.3) == doctest::Approx(0.09));
  // Gamma with log link: theta + t tau must stay negative.
  const GlmFamily g = GlmFamily::gamma_log();
  CHECK(std::isinf(g.centered_log_mgf(0.0, 1.0, 5.0)));
  // Bernoulli: log(1 - p + p e^t) - t p.
  const double p = sigmoid(0.4);
  CHECK(GlmFamily::logistic().centered_log_mgf(0.4, 1.0, 0.7) ==
        doctest::Approx(std::log(1 - p + p * std::exp(0.7)) - 0.7 * p));
}

TEST_CASE("domain errors") {
  const GlmFamily p = GlmFamily::poisson();
  CHECK_THROWS_AS(p.log_density(1.0, 0.0, 2.0), DomainError);
  CHECK_THROWS_AS(p.log_density(-1.0, 0.0, 1.0), DomainError);
  CHECK_THROWS_AS(GlmFamily::logistic().log_density(0.5, 0.0, 1.0), DomainError);
  CHECK_THROWS_AS(validate_dispersion({1.0, 0.0}), DomainError);
  CHECK_FALSE(GlmFamily::gamma_log().in_domain(0.1));
}

TEST_CASE("sampling reproduces the mean") {
  std::mt19937_64 rng(11);
  for (const auto& f : families()) {
    const double tau = f.discrete() ? 1.0 : 0.7;
    double s = 0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) s += f.sample(0.2, tau, rng);
    const double sd = std::sqrt(f.variance(0.2, tau) / n);
    CHECK(std::abs(s / n - f.mean(0.2)) < 5 * sd);
  }
}
