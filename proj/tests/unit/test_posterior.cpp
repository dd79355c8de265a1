#include <cmath>
#include <random>

#include "doctest.h"
#include "sbvm/error.hpp"
#include "sbvm/posterior.hpp"

using namespace sbvm;

namespace {

Dataset make_data(GlmFamily f, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Matrix x(n, 4);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 4; ++j) x(i, j) = z(rng);
  Simulation sim;
  sim.family = f;
  sim.design = GroupedDesign(x, {1, 1, 1, 1});
  sim.tau = Vector::Ones(n);
  sim.truth = {{0, 2}, Vector::Zero(2)};
  sim.truth.values << 0.8, -0.6;
  return sim.draw(rng);
}

SasPrior gaussian_prior(int g) { return SasPrior(SizePrior::complexity(g, 1.0, 1.0), Slab::gaussian(1.0), std::vector<int>(g, 1)); }

}  // namespace

TEST_CASE("weights are normalized and deterministic") {
  const Dataset d = make_data(GlmFamily::logistic(), 200, 1);
  const SasPrior prior = gaussian_prior(4);
  const SupportPosterior a = support_posterior(d, prior, 0.5, 4);
  const SupportPosterior b = support_posterior(d, prior, 0.5, 4);
  double total = 0.0;
  for (const auto& e : a.entries) total += std::exp(e.log_weight);
  CHECK(a.normalized);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a.entries.size() == 16);
  for (std::size_t k = 0; k < a.entries.size(); ++k) CHECK(a.entries[k].log_weight == b.entries[k].log_weight);
}

TEST_CASE("laplace and exact marginals agree closely for a large sample") {
  const Dataset d = make_data(GlmFamily::poisson(), 400, 2);
  const SasPrior prior = gaussian_prior(4);
  const PosteriorProblem pb(d, prior, 1.0);
  for (const Support& s : {Support{0}, Support{0, 2}, Support{0, 1, 2}}) {
    const RestrictedModel m = pb.model(s);
    const MarginalEstimate ex = exact_log_marginal(pb, m);
    CHECK(ex.exact_method == ExactMethod::gauss_hermite);
    CHECK(ex.reliable);
    CHECK(std::abs(ex.log_exact - laplace_log_marginal(pb, m, CenterMode::posterior_mode)) < 0.05);
  }
}

TEST_CASE("temperature scales the gaussian posterior precision") {
  const Dataset d = make_data(GlmFamily::gaussian(), 100, 3);
  const SasPrior prior = gaussian_prior(4);
  const OracleLaw o1 = oracle_law(d, 1.0), oh = oracle_law(d, 0.5);
  CHECK((oh.covariance - 2.0 * o1.covariance).norm() < 1e-10 * o1.covariance.norm());
  CHECK((o1.precision * o1.covariance - Matrix::Identity(2, 2)).norm() < 1e-10);
}

TEST_CASE("mixture weights live on supersets of the truth") {
  const Dataset d = make_data(GlmFamily::logistic(), 300, 4);
  const SasPrior prior = gaussian_prior(4);
  const SupportPosterior mix = mixture_weights(d, prior, 0.5, 4, 1);
  for (const auto& e : mix.entries) {
    CHECK(is_subset(d.truth->support, e.support));
    CHECK(e.support.size() <= 2);
    CHECK(e.summary_ok);
  }
}

TEST_CASE("posterior mode ties go to the first support") {
  SupportPosterior sp;
  sp.entries.resize(3);
  sp.entries[0].support = {0};
  sp.entries[1].support = {1};
  sp.entries[2].support = {2};
  sp.entries[0].log_weight = std::log(0.25);
  sp.entries[1].log_weight = std::log(0.375);
  sp.entries[2].log_weight = std::log(0.375);
  sp.normalized = true;
  CHECK(posterior_mode_support(sp) == Support{1});
}

TEST_CASE("gaussian sampler moments") {
  Matrix prec(2, 2);
  prec << 2.0, 0.5, 0.5, 1.0;
  const Vector mean = Vector::Constant(2, 1.0);
  const Matrix cov = prec.inverse();
  std::mt19937_64 rng(5);
  const int n = 40000;
  Vector s = Vector::Zero(2);
  Matrix ss = Matrix::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    const Vector x = sample_gaussian(mean, prec, rng);
    s += x;
    ss += (x - mean) * (x - mean).transpose();
  }
  CHECK((s / n - mean).norm() < 0.02);
  CHECK((ss / n - cov).norm() < 0.03);
  CHECK(log_gaussian_density(mean, mean, prec) ==
        doctest::Approx(-kLog2Pi + 0.5 * std::log(prec.determinant())));
}

TEST_CASE("exact sampler concentrates on heavy supports") {
  const Dataset d = make_data(GlmFamily::logistic(), 300, 6);
  const SasPrior prior = gaussian_prior(4);
  const PosteriorProblem pb(d, prior, 1.0);
  const SupportPosterior sp = support_posterior(d, prior, 1.0, 2);
  std::mt19937_64 rng(7);
  const ExactSampleResult r = sample_exact_posterior(pb, sp, 500, rng);
  CHECK(r.draws.size() == 500);
  CHECK_FALSE(r.flagged);
}

TEST_CASE("prior and data disagreement is rejected") {
  const Dataset d = make_data(GlmFamily::gaussian(), 50, 8);
  CHECK_THROWS_AS(PosteriorProblem(d, gaussian_prior(3), 1.0), DomainError);
}
