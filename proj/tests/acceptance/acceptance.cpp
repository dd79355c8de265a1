// Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
// when any criterion fails. Optional arguments restrict the run to the listed
// criterion numbers, e.g. `sbvm_acceptance 1 3 11`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "sbvm/diagnostics.hpp"
#include "sbvm/experiments.hpp"
#include "sbvm/glm_family.hpp"
#include "sbvm/posterior.hpp"
#include "sbvm/restricted_fit.hpp"

using namespace sbvm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::vector<GlmFamily> all_families() {
  return {GlmFamily::gaussian(), GlmFamily::logistic(), GlmFamily::poisson(),
          GlmFamily::probit(),   GlmFamily::gamma_log(), GlmFamily::negbin_log(2.5)};
}

// ---------------------------------------------------------------------------
// 1. Gaussian likelihood with a Gaussian slab: marginals against the
// conjugate closed form.

// log int exp{alpha (l_S(b) - l_ref)} N(b; 0, sigma2 I) db with
// l(b) = sum_i (y_i eta_i - eta_i^2 / 2) / tau_i.
double conjugate_log_evidence(const Dataset& d, const Support& s, double alpha, double sigma2, double l_ref) {
  const Matrix xs = d.design.columns(s);
  const int p = static_cast<int>(xs.cols());
  const double l0 = 0.0;  // l at b = 0 without the carrier
  if (p == 0) return alpha * (l0 - l_ref);
  const Vector w = alpha * d.tau.cwiseInverse();
  const Matrix prec = xs.transpose() * w.asDiagonal() * xs + Matrix::Identity(p, p) / sigma2;
  const Vector h = xs.transpose() * (w.asDiagonal() * d.y);
  Eigen::LLT<Matrix> llt(prec);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return alpha * (l0 - l_ref) - 0.5 * p * std::log(sigma2) - 0.5 * logdet + 0.5 * h.dot(llt.solve(h));
}

Outcome criterion_conjugate() {
  ExperimentConfig c;
  c.family.kind = FamilyKind::gaussian;
  c.design.n = 50;
  c.design.g = 3;
  c.design.group_sizes = {1, 1, 1};
  c.truth.support = {0, 2};
  c.truth.blocks = {{1.0}, {-0.5}};
  c.prior.slab = SlabKind::group_gaussian;
  c.prior.sigma2 = 1.0;
  const Dataset d = generate_dataset(c);
  const SasPrior prior = make_prior(c.prior, c.design.group_sizes);
  double worst_marginal = 0.0, worst_weight = 0.0;
  for (double alpha : {1.0, 0.5}) {
    const PosteriorProblem pb(d, prior, alpha);
    const auto supports = enumerate_supports(3, 3);
    std::vector<double> closed;
    for (const auto& s : supports) {
      const RestrictedModel m = pb.model(s);
      const double ref = conjugate_log_evidence(d, s, alpha, 1.0, pb.l_ref());
      const double ex = exact_log_marginal(pb, m).log_exact;
      const double la = laplace_log_marginal(pb, m, CenterMode::posterior_mode);
      worst_marginal = std::max({worst_marginal, std::abs(ex - ref), std::abs(la - ref)});
      closed.push_back(prior.log_support_mass(s) + ref);
    }
    const double lse = log_sum_exp(closed);
    PosteriorOptions po;
    po.mode = MarginalMode::exact;
    const SupportPosterior exact = support_posterior(d, prior, alpha, 3, po);
    po.mode = MarginalMode::laplace;
    const SupportPosterior lap = support_posterior(d, prior, alpha, 3, po);
    for (std::size_t k = 0; k < supports.size(); ++k) {
      const double w = std::exp(closed[k] - lse);
      worst_weight = std::max({worst_weight, std::abs(exact.weight(supports[k]) - w),
                               std::abs(lap.weight(supports[k]) - w)});
    }
  }
  return {worst_marginal <= 1e-8 && worst_weight <= 1e-10,
          fmt("max marginal error %.2e (tol 1e-8), max weight error %.2e (tol 1e-10)", worst_marginal,
              worst_weight)};
}

// ---------------------------------------------------------------------------
// 2. Transform identity: int f^alpha g^(1-alpha) = exp(-J_alpha).

Outcome criterion_transform() {
  Rng rng(20240611);
  double worst = 0.0;
  std::string where;
  for (const GlmFamily& fam : all_families()) {
    for (int t = 0; t < 200; ++t) {
      const double alpha = uniform(rng, 0.05, 0.95);
      const double lo = fam.kind() == FamilyKind::poisson || fam.kind() == FamilyKind::negbin_log ? -1.5 : -2.0;
      const double eta = uniform(rng, lo, 1.5), eta0 = uniform(rng, lo, 1.5);
      const double tau = fam.discrete() ? 1.0 : uniform(rng, 0.3, 2.0);
      auto integrand = [&](double y) {
        const double v = alpha * fam.log_density(y, eta, tau) + (1.0 - alpha) * fam.log_density(y, eta0, tau);
        return std::isfinite(v) ? std::exp(v) : 0.0;
      };
      double lhs = 0.0;
      if (fam.kind() == FamilyKind::logistic || fam.kind() == FamilyKind::probit) {
        lhs = integrand(0.0) + integrand(1.0);
      } else if (fam.discrete()) {
        for (double y = 0.0; y <= 600.0; y += 1.0) lhs += integrand(y);
      } else if (fam.kind() == FamilyKind::gaussian) {
        lhs = integrate_real_line(integrand, alpha * eta + (1.0 - alpha) * eta0);
      } else {
        lhs = integrate_upper(integrand, 0.0);
      }
      const double err = std::abs(lhs - std::exp(-fam.renyi_gap(alpha, eta, eta0, tau)));
      if (err > worst) {
        worst = err;
        where = fam.name();
      }
    }
  }
  return {worst <= 1e-7, fmt("max |integral - exp(-J)| = %.2e over 6 x 200 tuples (worst: %s, tol 1e-7)", worst,
                             where.c_str())};
}

// ---------------------------------------------------------------------------
// 3. Schur complement representation of the projected excess.

Outcome criterion_schur() {
  Rng rng(77);
  std::normal_distribution<double> z;
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    const int p = 2 + static_cast<int>(rng() % 9);
    const int p0 = 1 + static_cast<int>(rng() % (p - 1));
    Matrix a(p, p);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j) a(i, j) = z(rng);
    const Matrix f = a * a.transpose() + 0.1 * Matrix::Identity(p, p);
    Vector g(p);
    for (int i = 0; i < p; ++i) g(i) = z(rng);
    const SchurProjection sp = schur_projection(f, g, p0);
    // Oracle: full and nested quadratic forms from independent solves.
    const double full = g.dot(f.ldlt().solve(g));
    const Vector g0 = g.head(p0);
    const double nested = g0.dot(f.topLeftCorner(p0, p0).ldlt().solve(g0));
    const double ref = full - nested;
    worst = std::max(worst, std::abs(sp.excess - ref) / std::max(std::abs(ref), 1e-300));
  }
  return {worst <= 1e-9, fmt("max relative error %.2e over 500 instances (tol 1e-9)", worst)};
}

// ---------------------------------------------------------------------------
// 4. Derivatives, normalization, Fisher weights.

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

Outcome criterion_derivatives() {
  Rng rng(404);
  double d_worst = 0.0, norm_worst = 0.0, fisher_worst = 0.0;
  const double h = 1e-5;
  for (const GlmFamily& fam : all_families()) {
    for (int t = 0; t < 25; ++t) {
      const double eta = uniform(rng, -1.5, 1.5);
      const double tau = fam.discrete() ? 1.0 : uniform(rng, 0.5, 2.0);
      const Link l = fam.link(eta), lp = fam.link(eta + h), lm = fam.link(eta - h);
      d_worst = std::max(d_worst, rel((lp.xi - lm.xi) / (2 * h), l.xi1));
      d_worst = std::max(d_worst, rel((lp.xi1 - lm.xi1) / (2 * h), l.xi2));
      const Cumulant c = fam.cumulant(l.xi), cp = fam.cumulant(l.xi + h), cm = fam.cumulant(l.xi - h);
      d_worst = std::max(d_worst, rel((cp.b - cm.b) / (2 * h), c.b1));
      d_worst = std::max(d_worst, rel((cp.b1 - cm.b1) / (2 * h), c.b2));
      const double alpha = uniform(rng, 0.1, 0.9), eta0 = uniform(rng, -1.0, 1.0);
      d_worst = std::max(d_worst, rel((fam.renyi_gap(alpha, eta + h, eta0, tau) -
                                       fam.renyi_gap(alpha, eta - h, eta0, tau)) / (2 * h),
                                      fam.renyi_gap_deta(alpha, eta, eta0, tau)));

      // Normalization.
      double mass = 0.0;
      if (fam.discrete()) {
        const double top = fam.kind() == FamilyKind::logistic || fam.kind() == FamilyKind::probit ? 1.0 : 400.0;
        for (double y = 0.0; y <= top; y += 1.0) mass += std::exp(fam.log_density(y, eta, tau));
      } else if (fam.kind() == FamilyKind::gaussian) {
        mass = integrate_real_line([&](double y) { return std::exp(fam.log_density(y, eta, tau)); }, fam.mean(eta));
      } else {
        mass = integrate_upper([&](double y) { return std::exp(fam.log_density(y, eta, tau)); }, 0.0);
      }
      norm_worst = std::max(norm_worst, std::abs(mass - 1.0));

      // Fisher weight as the variance of the eta-score, by finite differences.
      const double info = fam.expectation(eta, tau, [&](double y) {
        const double s = (fam.log_density(y, eta + h, tau) - fam.log_density(y, eta - h, tau)) / (2 * h);
        return s * s;
      });
      fisher_worst = std::max(fisher_worst, rel(info, fam.fisher_weight(eta, tau)));
    }
  }

  // Restricted log-likelihood gradient and Hessian.
  for (const GlmFamily& fam : all_families()) {
    const int n = 40, p = 3;
    Matrix x(n, p);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < p; ++j) x(i, j) = uniform(rng, -0.5, 0.5);
    const GroupedDesign design(x, {1, 2});
    const Vector tau = Vector::Constant(n, fam.discrete() ? 1.0 : 0.8);
    Vector y(n);
    for (int i = 0; i < n; ++i) y(i) = fam.sample(0.2, tau(i), rng);
    const RestrictedModel m(fam, design, tau, y, {0, 1});
    Vector b(3);
    b << 0.3, -0.2, 0.1;
    const auto der = m.loglik_grad_hess(b);
    for (int j = 0; j < p; ++j) {
      Vector e = Vector::Zero(p);
      e(j) = h;
      d_worst = std::max(d_worst, rel((m.loglik(b + e) - m.loglik(b - e)) / (2 * h), der.g(j)));
      const Vector gp = m.loglik_grad_hess(b + e).g, gm = m.loglik_grad_hess(b - e).g;
      for (int k = 0; k < p; ++k) d_worst = std::max(d_worst, rel(-(gp(k) - gm(k)) / (2 * h), der.h(k, j)));
    }
  }

  // Slab derivatives.
  for (Slab slab : {Slab::gaussian(2.0), Slab::laplace(1.5)}) {
    Vector b(3);
    b << 0.4, -0.7, 0.25;
    Vector g = Vector::Zero(3);
    Matrix hs = Matrix::Zero(3, 3);
    slab.add_group_derivatives(b, g, hs);
    for (int j = 0; j < 3; ++j) {
      Vector e = Vector::Zero(3);
      e(j) = h;
      d_worst = std::max(d_worst, rel((slab.log_group_density(b + e) - slab.log_group_density(b - e)) / (2 * h), g(j)));
      Vector gp = Vector::Zero(3), gm = Vector::Zero(3);
      Matrix tmp = Matrix::Zero(3, 3);
      slab.add_group_derivatives(b + e, gp, tmp);
      slab.add_group_derivatives(b - e, gm, tmp);
      for (int k = 0; k < 3; ++k) d_worst = std::max(d_worst, rel((gp(k) - gm(k)) / (2 * h), hs(k, j)));
    }
  }

  return {d_worst <= 1e-6 && norm_worst <= 1e-8 && fisher_worst <= 1e-7,
          fmt("derivative rel err %.2e (tol 1e-6), normalization err %.2e (tol 1e-8), fisher rel err %.2e "
              "(tol 1e-7)",
              d_worst, norm_worst, fisher_worst)};
}

// ---------------------------------------------------------------------------
// Logistic instance shared by criteria 5, 6, 7 and 10.

ExperimentConfig logistic_instance() {
  ExperimentConfig c;
  c.family.kind = FamilyKind::logistic;
  c.design.n = 1600;
  c.design.g = 20;
  c.design.group_sizes.assign(20, 1);
  c.truth.support = {3, 11};
  c.truth.signal_multiplier = 8.0;
  c.alpha = 0.5;
  c.s_max = 3;
  c.k_dim = 3;
  c.n_grid = {100, 400, 1600};
  c.seeds = {11, 12, 13};
  return c;
}

std::vector<Simulation> logistic_sims(const ExperimentConfig& c) {
  std::vector<Simulation> sims;
  for (int n : c.n_grid) sims.push_back(make_simulation(c, n));
  return sims;
}

// Every step down exceeds k combined standard errors.
bool decreasing_within(const std::vector<double>& v, const std::vector<double>& se, double k) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i - 1] - v[i] > k * std::hypot(se[i], se[i - 1]))) return false;
  return true;
}

Outcome criterion_collapse() {
  const ExperimentConfig c = logistic_instance();
  const SasPrior prior = make_prior(c.prior, c.design.group_sizes);
  const auto rows = oracle_collapse_experiment(logistic_sims(c), prior, c.alpha, c.s_max, c.k_dim, 200, 501);
  std::vector<double> v, se;
  std::string detail = "mean 1-omega_S0:";
  for (const auto& r : rows) {
    v.push_back(r.value);
    se.push_back(r.se);
    detail += fmt(" n=%d %.4f(%.4f)", r.n, r.value, r.se);
  }
  const bool pass = decreasing_within(v, se, 2.0) && v.back() <= 0.05;
  return {pass, detail + "; terminal tol 0.05"};
}

Outcome criterion_exact_vs_mixture() {
  ExperimentConfig c = logistic_instance();
  const Dataset d = generate_dataset(c, 1600);
  const SasPrior prior = make_prior(c.prior, c.design.group_sizes);
  PosteriorOptions po;
  po.mode = MarginalMode::exact;
  po.exact_weight_floor = 1e-12;
  const SupportPosterior sp = support_posterior(d, prior, c.alpha, c.s_max, po);
  const SupportPosterior mix = mixture_weights(d, prior, c.alpha, c.s_max, c.k_dim);
  const PosteriorProblem pb(d, prior, c.alpha);
  TvOptions tvo;
  tvo.mc_draws = 40000;
  tvo.seed = 606;
  const TvEstimate tv = tv_between_support_mixtures(exact_mixture_law(pb, sp), gaussian_mixture_law(mix), tvo);
  return {tv.value <= 0.10 && tv.se <= 0.01,
          fmt("TV(exact, mixture) = %.4f, se %.4f, method %s (tol 0.10, se 0.01)", tv.value, tv.se,
              std::string(to_string(tv.method)).c_str())};
}

Outcome criterion_recovery() {
  const ExperimentConfig c = logistic_instance();
  const SasPrior prior = make_prior(c.prior, c.design.group_sizes);
  EngineSettings engine{c.s_max, make_posterior_options(c)};
  engine.posterior.summaries = false;
  const auto rows = support_recovery_experiment(logistic_sims(c), prior, c.alpha, engine, 200, 701);
  std::vector<double> m, mse, h, hse;
  std::string detail;
  for (const auto& r : rows) {
    m.push_back(-r.posterior_mass);
    mse.push_back(r.posterior_mass_se);
    h.push_back(-r.mode_hit);
    hse.push_back(r.mode_hit_se);
    detail += fmt("n=%d mass %.4f(%.4f) hit %.4f(%.4f); ", r.n, r.posterior_mass, r.posterior_mass_se, r.mode_hit,
                  r.mode_hit_se);
  }
  // Nondecreasing within 2 se: a drop larger than 2 combined se fails.
  auto nondecreasing = [](const std::vector<double>& neg, const std::vector<double>& se) {
    for (std::size_t i = 1; i < neg.size(); ++i)
      if (neg[i] - neg[i - 1] > 2.0 * std::hypot(se[i], se[i - 1])) return false;
    return true;
  };
  const bool pass = -m.back() >= 0.95 && -h.back() >= 0.95 && nondecreasing(m, mse) && nondecreasing(h, hse);
  return {pass, detail + "terminal tol 0.95"};
}

// ---------------------------------------------------------------------------
// 8. Plug-in credible set coverage.

Outcome criterion_coverage() {
  std::string detail;
  bool pass = true;
  for (FamilyKind kind : {FamilyKind::gaussian, FamilyKind::logistic}) {
    ExperimentConfig c;
    c.family.kind = kind;
    c.design.n = 2000;
    c.design.g = 50;
    c.design.group_sizes.assign(50, 1);
    c.truth.support = {3, 17};
    c.truth.signal_multiplier = 8.0;
    c.alpha = 1.0;
    c.s_max = 2;
    c.seeds = {21, 22, 23};
    const Simulation sim = make_simulation(c);
    const SasPrior prior = make_prior(c.prior, c.design.group_sizes);
    EngineSettings engine{c.s_max, make_posterior_options(c)};
    engine.posterior.summaries = false;
    CoverageOptions co;
    co.level = 0.95;
    co.credibility_draws = 1000;
    const CoverageResult r = coverage_experiment(sim, prior, c.alpha, engine, co, 500, 801);
    const double band = 3.0 * std::sqrt(0.95 * 0.05 / r.used);
    const bool ok = std::abs(r.coverage - 0.95) <= band && r.credibility_gap <= 0.05;
    pass = pass && ok;
    detail += fmt("%s coverage %.4f (band +-%.4f) gap %.4f(%.4f) used %d; ", std::string(to_string(kind)).c_str(),
                  r.coverage, band, r.credibility_gap, r.gap_se, r.used);
  }
  return {pass, detail + "gap tol 0.05"};
}

// ---------------------------------------------------------------------------
// 9. Score envelope.

Outcome criterion_score() {
  ExperimentConfig c = logistic_instance();
  c.design.n = 400;
  const Simulation sim = make_simulation(c);
  const ScoreEnvelopeResult r = score_envelope_experiment(sim, 2, 10000, 901);
  const bool env_ok = r.exceedance <= r.bound + 3.0 * r.se;

  ExperimentConfig g = c;
  g.family.kind = FamilyKind::gaussian;
  const Simulation gs = make_simulation(g);
  const ScoreEnvelopeResult rg = score_envelope_experiment(gs, 2, 100000, 902);
  const double dev = std::abs(rg.check_empirical - rg.check_analytic);
  return {env_ok && dev <= 1e-3,
          fmt("logistic exceedance %.2e (se %.1e) vs bound %.2e, threshold %.3f; gaussian chi2 tail %.5f vs %.5f "
              "(|diff| %.1e, tol 1e-3)",
              r.exceedance, r.se, r.bound, r.threshold, rg.check_empirical, rg.check_analytic, dev)};
}

// ---------------------------------------------------------------------------
// 10. Renyi separation table.

Outcome criterion_renyi() {
  const ExperimentConfig c = logistic_instance();
  const auto sims = logistic_sims(c);
  std::vector<double> summ;
  double min_r = INFINITY, grid_dev = 0.0;
  int grid_checked = 0;
  std::string detail;
  for (const auto& sim : sims) {
    const RenyiTable t = renyi_separation(sim, c.alpha, c.s_max);
    for (const auto& e : t.entries) {
      min_r = std::min(min_r, e.r);
      if (e.grid_r >= 0.0) {
        grid_dev = std::max(grid_dev, std::abs(e.r - e.grid_r));
        ++grid_checked;
      }
    }
    summ.push_back(t.summability);
    detail += fmt("n=%d summability %.3e; ", t.n, t.summability);
  }
  const double ratio = summ.front() / summ.back();
  const bool pass = min_r > 0.0 && grid_dev <= 1e-6 && ratio >= 10.0;
  return {pass, detail + fmt("min R %.3e, max grid deviation %.1e over %d entries, decrease %.2fx (need >= 10x)",
                             min_r, grid_dev, grid_checked, ratio)};
}

// ---------------------------------------------------------------------------
// 11. Determinism of the JSON artifacts.

std::string artifacts(const ExperimentConfig& c) {
  const Dataset d = generate_dataset(c);
  const SasPrior prior = make_prior(c.prior, c.design.group_sizes);
  const SupportPosterior sp = support_posterior(d, prior, c.alpha, c.s_max, make_posterior_options(c));
  Json j;
  j["config_hash"] = config_hash(c);
  j["posterior"] = posterior_json(sp);
  const Simulation sim = make_simulation(c);
  EngineSettings engine{c.s_max, make_posterior_options(c)};
  engine.posterior.mode = MarginalMode::laplace;
  engine.posterior.summaries = false;
  CoverageOptions co;
  co.credibility_draws = 200;
  const CoverageResult cov = coverage_experiment(sim, prior, c.alpha, engine, co, 200, c.seeds.experiment);
  DiagnosticsReport rep;
  rep.coverage = cov.coverage;
  rep.coverage_se = cov.se;
  AuditOptions ao;
  ao.score_replications = 200;
  ao.renyi_s_max = 1;
  const DiagnosticsReport audit = assumption_audit(sim, prior, ao);
  rep.rows = audit.rows;
  rep.renyi = audit.renyi;
  j["report"] = report_json(rep);
  return dump_json(j);
}

Outcome criterion_determinism() {
  ExperimentConfig c;
  c.family.kind = FamilyKind::poisson;
  c.design.n = 150;
  c.design.g = 6;
  c.design.group_sizes = {1, 2, 1, 1, 2, 1};
  c.truth.support = {1, 4};
  c.truth.signal_multiplier = 6.0;
  c.alpha = 0.7;
  c.s_max = 2;
  c.mode = MarginalMode::exact;
  c.tolerances.is_draws = 20000;
  const std::string a = artifacts(c), b = artifacts(c);
  return {a == b && !a.empty(), fmt("two runs: %zu and %zu bytes, %s", a.size(), b.size(),
                                    a == b ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"conjugate exactness", criterion_conjugate},
      {"transform identity", criterion_transform},
      {"Schur identity", criterion_schur},
      {"derivatives and normalization", criterion_derivatives},
      {"oracle collapse trend", criterion_collapse},
      {"exact posterior vs mixture", criterion_exact_vs_mixture},
      {"support recovery", criterion_recovery},
      {"credible set coverage", criterion_coverage},
      {"score envelope", criterion_score},
      {"Renyi separation", criterion_renyi},
      {"determinism", criterion_determinism},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
