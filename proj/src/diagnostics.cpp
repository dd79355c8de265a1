#include "sbvm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <random>

#include <boost/math/tools/minima.hpp>

#include "sbvm/error.hpp"
#include "sbvm/parallel.hpp"

namespace sbvm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t support_key(const Support& s) {
  std::uint64_t h = 0x9b05688c2b3e6c1fULL;
  for (int g : s) h = mix64(h ^ static_cast<std::uint64_t>(g + 1));
  return h;
}

// N(mean, precision^{-1}) with a cached Cholesky factor of the precision.
struct GaussianLaw {
  Vector mean;
  Matrix lower;
  double log_norm = 0.0;

  GaussianLaw(const Vector& m, const Matrix& precision) : mean(m) {
    if (m.size() > 0) lower = cholesky_lower(precision, "component precision");
    log_norm = (m.size() > 0 ? lower.diagonal().array().log().sum() : 0.0) - 0.5 * m.size() * kLog2Pi;
  }
  double log_density(const Vector& x) const {
    if (mean.size() == 0) return 0.0;
    const Vector u = lower.transpose() * (x - mean);
    return log_norm - 0.5 * u.squaredNorm();
  }
  Vector sample(Rng& rng) const {
    std::normal_distribution<double> nd;
    Vector z(mean.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = nd(rng);
    return mean + lower.transpose().triangularView<Eigen::Upper>().solve(z);
  }
};

double mean_of(const std::vector<double>& v) {
  return v.empty() ? kNaN : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Standard error of the mean.
double se_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

double binomial_se(double p, std::size_t n) { return n ? std::sqrt(p * (1.0 - p) / static_cast<double>(n)) : 0.0; }

void require_nonempty_truth(const PaddedVector& truth, const char* op) {
  if (truth.support.empty())
    throw DomainError(std::string(op) + ": the true support must contain at least one group");
}

// Terms of the per-support TV integral 0.5 * int |wa fa - wb fb|.
double tv_shared_quadrature(const ComponentLaw& a, const ComponentLaw& b) {
  auto f = [&](double x) {
    const Vector v = Vector::Constant(1, x);
    const double fa = a.weight > 0.0 ? a.weight * std::exp(a.log_density(v)) : 0.0;
    const double fb = b.weight > 0.0 ? b.weight * std::exp(b.log_density(v)) : 0.0;
    return std::abs(fa - fb);
  };
  const double ma = a.mean(0), sa = 1.0 / std::sqrt(a.precision(0, 0));
  const double mb = b.mean(0), sb = 1.0 / std::sqrt(b.precision(0, 0));
  std::vector<double> cuts = {ma - 12 * sa, ma - 3 * sa, ma, ma + 3 * sa, ma + 12 * sa,
                              mb - 12 * sb, mb - 3 * sb, mb, mb + 3 * sb, mb + 12 * sb};
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
    if (cuts[k + 1] > cuts[k]) total += integrate_adaptive(f, cuts[k], cuts[k + 1], 1e-10);
  return 0.5 * total;
}

// Importance sampling under the equal mixture of the two proposals.
std::pair<double, double> tv_shared_mc(const ComponentLaw& a, const ComponentLaw& b, long draws, Rng& rng) {
  const GaussianLaw qa(a.mean, a.precision), qb(b.mean, b.precision);
  std::bernoulli_distribution coin(0.5);
  double s1 = 0.0, s2 = 0.0;
  for (long k = 0; k < draws; ++k) {
    const Vector x = coin(rng) ? qa.sample(rng) : qb.sample(rng);
    const double la = qa.log_density(x), lb = qb.log_density(x);
    const double lq = std::max(la, lb) + std::log(0.5 * (std::exp(la - std::max(la, lb)) + std::exp(lb - std::max(la, lb))));
    const double ra = a.weight > 0.0 ? a.weight * std::exp(a.log_density(x) - lq) : 0.0;
    const double rb = b.weight > 0.0 ? b.weight * std::exp(b.log_density(x) - lq) : 0.0;
    const double v = std::abs(ra - rb);
    s1 += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(draws);
  const double m = s1 / n;
  const double var = std::max(0.0, s2 / n - m * m);
  return {0.5 * m, 0.5 * std::sqrt(var / n)};
}

}  // namespace

std::string_view to_string(TvMethod m) {
  switch (m) {
    case TvMethod::exact_singular_sum: return "exact_singular_sum";
    case TvMethod::per_support_quadrature: return "per_support_quadrature";
    case TvMethod::mc: return "mc";
  }
  return "unknown";
}

MixtureLaw gaussian_mixture_law(const SupportPosterior& sp) {
  if (!sp.normalized) throw DomainError("mixture law needs a normalized support posterior");
  MixtureLaw out;
  out.reserve(sp.entries.size());
  for (const auto& e : sp.entries) {
    ComponentLaw c;
    c.support = e.support;
    c.weight = std::exp(e.log_weight);
    c.gaussian = true;
    if (!e.support.empty()) {
      if (!e.summary_ok) throw DomainError("no Gaussian summary on support " + format_support(e.support));
      c.mean = e.mean;
      c.precision = e.precision;
      auto law = std::make_shared<GaussianLaw>(e.mean, e.precision);
      c.log_density = [law](const Vector& x) { return law->log_density(x); };
    }
    out.push_back(std::move(c));
  }
  return out;
}

MixtureLaw exact_mixture_law(const PosteriorProblem& pb, const SupportPosterior& sp) {
  if (!sp.normalized) throw DomainError("mixture law needs a normalized support posterior");
  MixtureLaw out;
  out.reserve(sp.entries.size());
  for (const auto& e : sp.entries) {
    ComponentLaw c;
    c.support = e.support;
    c.weight = std::exp(e.log_weight);
    c.gaussian = false;
    if (!e.support.empty()) {
      if (!e.expansion.ok)
        throw DomainError("no posterior-mode expansion on support " + format_support(e.support));
      c.mean = e.expansion.center;
      c.precision = e.expansion.precision;
      auto model = std::make_shared<RestrictedModel>(pb.model(e.support));
      const double log_z = e.log_marginal;
      c.log_density = [&pb, model, log_z](const Vector& x) { return pb.log_integrand(*model, x) - log_z; };
    }
    out.push_back(std::move(c));
  }
  return out;
}

TvEstimate tv_between_support_mixtures(const MixtureLaw& a, const MixtureLaw& b, const TvOptions& opt) {
  std::map<Support, std::pair<const ComponentLaw*, const ComponentLaw*>> joined;
  for (const auto& c : a) joined[c.support].first = &c;
  for (const auto& c : b) joined[c.support].second = &c;

  TvEstimate out;
  double value = 0.0;
  std::vector<std::pair<const ComponentLaw*, const ComponentLaw*>> shared;
  for (const auto& [s, pair] : joined) {
    const auto [ca, cb] = pair;
    if (!ca || !cb) {
      value += 0.5 * (ca ? ca->weight : cb->weight);
      continue;
    }
    if (ca->mean.size() != cb->mean.size()) throw DomainError("component dimensions disagree");
    if (ca->mean.size() == 0) {
      value += 0.5 * std::abs(ca->weight - cb->weight);
    } else if ((ca->weight < opt.negligible && cb->weight < opt.negligible) || ca->weight == 0.0 ||
               cb->weight == 0.0) {
      value += 0.5 * (ca->weight + cb->weight);
    } else {
      shared.emplace_back(ca, cb);
    }
  }

  std::vector<std::pair<double, double>> terms(shared.size());
  std::vector<TvMethod> methods(shared.size(), TvMethod::per_support_quadrature);
  parallel_for(shared.size(), [&](std::size_t k) {
    const auto& [ca, cb] = shared[k];
    if (ca->mean.size() == 1) {
      terms[k] = {tv_shared_quadrature(*ca, *cb), 0.0};
    } else {
      Rng rng = make_stream(opt.seed, support_key(ca->support));
      terms[k] = tv_shared_mc(*ca, *cb, opt.mc_draws, rng);
      methods[k] = TvMethod::mc;
    }
  });
  double var = 0.0;
  out.method = TvMethod::exact_singular_sum;
  for (std::size_t k = 0; k < shared.size(); ++k) {
    value += terms[k].first;
    var += terms[k].second * terms[k].second;
    if (methods[k] == TvMethod::mc)
      out.method = TvMethod::mc;
    else if (out.method != TvMethod::mc)
      out.method = TvMethod::per_support_quadrature;
  }
  out.value = std::clamp(value, 0.0, 1.0);
  out.se = std::sqrt(var);
  return out;
}

TvEstimate tv_between_support_mixtures(const SupportPosterior& a, const SupportPosterior& b, const TvOptions& opt) {
  return tv_between_support_mixtures(gaussian_mixture_law(a), gaussian_mixture_law(b), opt);
}

double tv_mixture_vs_oracle(const SupportPosterior& mix, const OracleLaw& oracle) {
  const PosteriorEntry* e = mix.find(oracle.support);
  auto close = [](const auto& x, const auto& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() &&
           (x - y).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + y.cwiseAbs().maxCoeff());
  };
  if (mix.normalized && e && e->summary_ok && close(e->mean, oracle.mean) && close(e->precision, oracle.precision))
    return std::clamp(-std::expm1(e->log_weight), 0.0, 1.0);
  ComponentLaw c;
  c.support = oracle.support;
  c.weight = 1.0;
  c.mean = oracle.mean;
  c.precision = oracle.precision;
  auto law = std::make_shared<GaussianLaw>(oracle.mean, oracle.precision);
  c.log_density = [law](const Vector& x) { return law->log_density(x); };
  return tv_between_support_mixtures(gaussian_mixture_law(mix), MixtureLaw{c}).value;
}

// ---------------------------------------------------------------------------

namespace {

void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("credible level must lie in (0, 1)");
}

}  // namespace

CredibleSet oracle_credible_set(const OracleLaw& law, double level) {
  check_level(level);
  CredibleSet cs;
  cs.kind = CredibleKind::oracle;
  cs.support = law.support;
  cs.center = law.mean;
  cs.precision = law.precision;
  cs.level = level;
  cs.chi2_quantile = chi2_quantile(static_cast<double>(law.mean.size()), level);
  return cs;
}

CredibleSet plugin_credible_set(const Dataset& data, double alpha, const Support& support, double level,
                                const NewtonOptions& opt) {
  check_level(level);
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0, 1]");
  CredibleSet cs;
  cs.kind = CredibleKind::plugin;
  cs.support = support;
  cs.level = level;
  const int p = data.design.support_dim(support);
  cs.chi2_quantile = chi2_quantile(p, level);
  if (p == 0) return cs;
  const RestrictedModel m(data.family, data.design, data.tau, data.y, support);
  const FitResult fit = restricted_mle(m, Vector::Zero(p), nullptr, opt);
  if (fit.converged && fit.info_pd && !fit.separated) {
    cs.center = fit.beta_hat;
    cs.precision = alpha * fit.observed_info;
  } else {
    cs.center = Vector::Zero(p);
    cs.precision = alpha * Matrix::Identity(p, p);
    cs.fallback = true;
  }
  return cs;
}

CredibleSet plugin_credible_set(const SupportPosterior& sp, double level) {
  check_level(level);
  const Support s = posterior_mode_support(sp);
  const PosteriorEntry* e = sp.find(s);
  CredibleSet cs;
  cs.kind = CredibleKind::plugin;
  cs.support = s;
  cs.level = level;
  const auto p = e->support.empty() ? 0 : (e->summary_ok ? e->mean.size() : e->expansion.center.size());
  cs.chi2_quantile = chi2_quantile(static_cast<double>(p), level);
  if (p == 0) return cs;
  if (e->summary_ok) {
    cs.center = e->mean;
    cs.precision = e->precision;
  } else {
    cs.center = Vector::Zero(p);
    cs.precision = sp.alpha * Matrix::Identity(p, p);
    cs.fallback = true;
  }
  return cs;
}

double quadratic_form(const GroupedDesign& design, const CredibleSet& cs, const Vector& beta) {
  if (cs.support.empty()) return 0.0;
  const Vector d = restrict_to(design, beta, cs.support).values - cs.center;
  return d.dot(cs.precision * d);
}

bool contains(const GroupedDesign& design, const CredibleSet& cs, const Vector& beta) {
  if (!is_subset(active_groups(design, beta), cs.support)) return false;
  return quadratic_form(design, cs, beta) <= cs.chi2_quantile;
}

double credibility(const PosteriorProblem& pb, const SupportPosterior& sp, const CredibleSet& cs, int draws,
                   std::uint64_t seed, double min_weight) {
  if (!sp.normalized) throw DomainError("credibility needs a normalized support posterior");
  const GroupedDesign& design = pb.data().design;
  double total = 0.0;
  for (const auto& e : sp.entries) {
    if (!is_subset(e.support, cs.support)) continue;
    const double w = std::exp(e.log_weight);
    if (w < min_weight) continue;
    const RestrictedModel m = pb.model(e.support);
    if (m.dim() == 0) {
      if (contains(design, cs, Vector::Zero(design.p()))) total += w;
      continue;
    }
    const LaplaceExpansion ex = e.expansion.ok ? e.expansion : posterior_mode_expansion(pb, m);
    const GaussianLaw q(ex.center, ex.precision);
    Rng rng = make_stream(seed, support_key(e.support));
    std::vector<double> lw(draws);
    std::vector<char> hit(draws);
    for (int k = 0; k < draws; ++k) {
      const Vector b = q.sample(rng);
      lw[k] = pb.log_integrand(m, b) - q.log_density(b);
      const Vector full = embed(design, {e.support, b});
      hit[k] = quadratic_form(design, cs, full) <= cs.chi2_quantile;
    }
    const double mx = *std::max_element(lw.begin(), lw.end());
    double num = 0.0, den = 0.0;
    for (int k = 0; k < draws; ++k) {
      const double v = std::exp(lw[k] - mx);
      den += v;
      if (hit[k]) num += v;
    }
    total += w * num / den;
  }
  return std::clamp(total, 0.0, 1.0);
}

// ---------------------------------------------------------------------------

CoverageResult coverage_experiment(const Simulation& sim, const SasPrior& prior, double alpha,
                                   const EngineSettings& engine, const CoverageOptions& opt, int replications,
                                   std::uint64_t seed) {
  if (replications < 200) throw DomainError("coverage_experiment needs at least 200 replications");
  check_level(opt.level);
  const Vector beta0 = sim.truth_ambient();
  struct Slot {
    bool used = false;
    bool covered = false;
    bool mode_ok = false;
    double gap = 0.0;
  };
  std::vector<Slot> slots(replications);
  parallel_for(slots.size(), [&](std::size_t r) {
    Rng rng = make_stream(seed, r);
    const Dataset data = sim.draw(rng);
    Slot& out = slots[r];
    try {
      Support s_hat = sim.truth.support;
      SupportPosterior sp;
      if (!opt.fix_support) {
        sp = support_posterior(data, prior, alpha, engine.s_max, engine.posterior);
        for (const auto& e : sp.entries)
          if (!e.marginal.reliable && std::exp(e.log_weight) > 1e-6) return;
        s_hat = posterior_mode_support(sp);
      }
      const CredibleSet cs = plugin_credible_set(data, alpha, s_hat, opt.level, engine.posterior.newton);
      if (cs.fallback) return;
      out.covered = contains(sim.design, cs, beta0);
      out.mode_ok = s_hat == sim.truth.support;
      if (!opt.fix_support) {
        const PosteriorProblem pb(data, prior, alpha, engine.posterior.loglik_scale);
        out.gap = std::abs(credibility(pb, sp, cs, opt.credibility_draws, mix64(seed ^ (r + 1))) - opt.level);
      }
      out.used = true;
    } catch (const SingularMatrix&) {
      out.used = false;
    }
  });
  CoverageResult res;
  std::vector<double> gaps;
  std::size_t covered = 0, mode_ok = 0;
  for (const auto& s : slots) {
    if (!s.used) {
      ++res.excluded;
      continue;
    }
    ++res.used;
    covered += s.covered;
    mode_ok += s.mode_ok;
    gaps.push_back(s.gap);
  }
  if (res.used == 0) throw Error("coverage_experiment: every replicate was excluded");
  res.coverage = static_cast<double>(covered) / res.used;
  res.se = binomial_se(res.coverage, res.used);
  res.mode_correct = static_cast<double>(mode_ok) / res.used;
  if (opt.fix_support) {
    res.credibility_gap = kNaN;
    res.gap_se = kNaN;
  } else {
    res.credibility_gap = mean_of(gaps);
    res.gap_se = se_of(gaps);
  }
  return res;
}

std::vector<RecoveryRow> support_recovery_experiment(const std::vector<Simulation>& sims, const SasPrior& prior,
                                                     double alpha, const EngineSettings& engine, int replications,
                                                     std::uint64_t seed) {
  std::vector<RecoveryRow> rows;
  for (std::size_t k = 0; k < sims.size(); ++k) {
    const Simulation& sim = sims[k];
    require_nonempty_truth(sim.truth, "support_recovery_experiment");
    if (k > 0 && sim.design.n() <= sims[k - 1].design.n())
      throw DomainError("support_recovery_experiment: the n grid must increase");
    std::vector<double> mass(replications, kNaN), hit(replications, kNaN);
    parallel_for(static_cast<std::size_t>(replications), [&](std::size_t r) {
      Rng rng = make_stream(seed ^ mix64(k), r);
      const Dataset data = sim.draw(rng);
      try {
        const SupportPosterior sp = support_posterior(data, prior, alpha, engine.s_max, engine.posterior);
        mass[r] = sp.weight(sim.truth.support);
        hit[r] = posterior_mode_support(sp) == sim.truth.support ? 1.0 : 0.0;
      } catch (const SingularMatrix&) {
      }
    });
    RecoveryRow row;
    row.n = sim.design.n();
    std::vector<double> m, h;
    for (int r = 0; r < replications; ++r) {
      if (std::isnan(mass[r])) {
        ++row.excluded;
        continue;
      }
      m.push_back(mass[r]);
      h.push_back(hit[r]);
    }
    row.posterior_mass = mean_of(m);
    row.posterior_mass_se = se_of(m);
    row.mode_hit = mean_of(h);
    row.mode_hit_se = binomial_se(row.mode_hit, h.size());
    rows.push_back(row);
  }
  return rows;
}

std::vector<TrendRow> oracle_collapse_experiment(const std::vector<Simulation>& sims, const SasPrior& prior,
                                                 double alpha, int s_max, int k_dim, int replications,
                                                 std::uint64_t seed) {
  std::vector<TrendRow> rows;
  for (std::size_t k = 0; k < sims.size(); ++k) {
    const Simulation& sim = sims[k];
    require_nonempty_truth(sim.truth, "oracle_collapse_experiment");
    std::vector<double> tv(replications, kNaN);
    parallel_for(static_cast<std::size_t>(replications), [&](std::size_t r) {
      Rng rng = make_stream(seed ^ mix64(k), r);
      const Dataset data = sim.draw(rng);
      try {
        const SupportPosterior mix = mixture_weights(data, prior, alpha, s_max, k_dim);
        tv[r] = tv_mixture_vs_oracle(mix, oracle_law(data, alpha));
      } catch (const SingularMatrix&) {
      }
    });
    TrendRow row;
    row.n = sim.design.n();
    std::vector<double> used;
    for (double v : tv) {
      if (std::isnan(v))
        ++row.excluded;
      else
        used.push_back(v);
    }
    row.value = mean_of(used);
    row.se = se_of(used);
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------

namespace {

// Affine maps y -> Z_S = A_S y - c_S for every support of size 1..s, stacked.
struct ScoreOperator {
  std::vector<Support> supports;
  std::vector<int> offsets;
  Matrix a;
  Vector c;
  int truth_index = -1;
};

ScoreOperator build_score_operator(const Simulation& sim, int s) {
  const GroupedDesign& d = sim.design;
  ScoreOperator op;
  for (const Support& t : enumerate_supports(d.num_groups(), std::min(s, d.num_groups())))
    if (!t.empty()) op.supports.push_back(t);
  int total = 0;
  for (std::size_t k = 0; k < op.supports.size(); ++k) {
    op.offsets.push_back(total);
    total += d.support_dim(op.supports[k]);
    if (op.supports[k] == sim.truth.support) op.truth_index = static_cast<int>(k);
  }
  op.offsets.push_back(total);
  op.a.resize(total, d.n());
  op.c.resize(total);
  const Vector beta0 = sim.truth_ambient();
  parallel_for(op.supports.size(), [&](std::size_t k) {
    const Support& t = op.supports[k];
    const PopulationCenter pc = pseudo_true_center(sim.family, d, sim.tau, t, beta0);
    const Vector eta = d.predictor(t, pc.beta_circ);
    Vector v(d.n()), mu(d.n());
    for (int i = 0; i < d.n(); ++i) {
      v(i) = sim.family.link(eta(i)).xi1 / sim.tau(i);
      mu(i) = sim.family.mean(eta(i));
    }
    const Matrix root = sym_inv_sqrt(pc.fisher_circ, "population Fisher block");
    const Matrix block = root * (d.columns(t).transpose() * v.asDiagonal());
    const int off = op.offsets[k], p = op.offsets[k + 1] - off;
    op.a.middleRows(off, p) = block;
    op.c.segment(off, p) = block * mu;
  });
  return op;
}

}  // namespace

double estimate_b_mgf(const Simulation& sim, int s, int random_directions, std::uint64_t seed) {
  const GroupedDesign& d = sim.design;
  const ScoreOperator op = build_score_operator(sim, s);
  const Vector eta0 = sim.truth_predictor();
  const Vector mu0 = population_mean(sim.family, d, sim.truth_ambient());
  const double window = 2.0 * std::sqrt(s * std::log(static_cast<double>(d.num_groups())));
  std::vector<double> per_support(op.supports.size(), 0.0);
  parallel_for(op.supports.size(), [&](std::size_t k) {
    const int off = op.offsets[k], p = op.offsets[k + 1] - off;
    std::vector<Vector> dirs;
    for (int j = 0; j < p; ++j) dirs.push_back(Vector::Unit(p, j));
    Rng rng = make_stream(seed, support_key(op.supports[k]));
    std::normal_distribution<double> nd;
    for (int r = 0; r < (p > 1 ? random_directions : 0); ++r) {
      Vector u(p);
      for (int j = 0; j < p; ++j) u(j) = nd(rng);
      dirs.push_back(u.normalized());
    }
    double best = 0.0;
    for (const Vector& u : dirs) {
      // u^T Z_S = sum_i a_i (y_i - mu0_i) + u^T (A_S mu0 - c_S).
      const Vector a = op.a.middleRows(off, p).transpose() * u;
      const double shift = u.dot(op.a.middleRows(off, p) * mu0 - op.c.segment(off, p));
      for (double sign : {1.0, -1.0}) {
        for (int j = 1; j <= 32; ++j) {
          const double lambda = sign * window * j / 32.0;
          double lm = lambda * shift;
          for (int i = 0; i < d.n() && std::isfinite(lm); ++i)
            lm += sim.family.centered_log_mgf(eta0(i), sim.tau(i), lambda * a(i));
          if (!std::isfinite(lm)) break;
          best = std::max(best, lm / (lambda * lambda));
        }
      }
    }
    per_support[k] = best;
  });
  return *std::max_element(per_support.begin(), per_support.end());
}

ScoreEnvelopeResult score_envelope_experiment(const Simulation& sim, int s, int replications, std::uint64_t seed,
                                              double multiplier, double b_mgf) {
  if (replications < 1) throw DomainError("score_envelope_experiment needs replications >= 1");
  const GroupedDesign& d = sim.design;
  const double log_g = std::log(static_cast<double>(d.num_groups()));
  ScoreEnvelopeResult res;
  res.b_mgf = b_mgf >= 0.0 ? b_mgf : estimate_b_mgf(sim, s);
  res.k_sc = 4.0 * std::sqrt(res.b_mgf * kKappa0);
  res.threshold = multiplier * res.k_sc * std::sqrt(s * log_g);
  res.bound = 2.0 * std::exp(-2.0 * s * log_g);

  const ScoreOperator op = build_score_operator(sim, s);
  const Vector eta0 = sim.truth_predictor();
  const int p0 = op.truth_index >= 0 ? op.offsets[op.truth_index + 1] - op.offsets[op.truth_index] : 0;
  const double q99 = p0 > 0 ? chi2_quantile(p0, 0.99) : 0.0;
  std::vector<double> sup(replications), tail(replications, 0.0);
  // Replicates are processed in fixed chunks so each stream is independent of scheduling.
  constexpr int kChunk = 256;
  const int chunks = (replications + kChunk - 1) / kChunk;
  parallel_for(static_cast<std::size_t>(chunks), [&](std::size_t c) {
    const int lo = static_cast<int>(c) * kChunk, hi = std::min(replications, lo + kChunk);
    Matrix ys(d.n(), hi - lo);
    for (int r = lo; r < hi; ++r) {
      Rng rng = make_stream(seed, r);
      for (int i = 0; i < d.n(); ++i) ys(i, r - lo) = sim.family.sample(eta0(i), sim.tau(i), rng);
    }
    const Matrix z = (op.a * ys).colwise() - op.c;
    for (int r = lo; r < hi; ++r) {
      double best = 0.0;
      for (std::size_t k = 0; k < op.supports.size(); ++k) {
        const int off = op.offsets[k], p = op.offsets[k + 1] - off;
        const double nrm2 = z.col(r - lo).segment(off, p).squaredNorm();
        best = std::max(best, nrm2);
        if (static_cast<int>(k) == op.truth_index) tail[r] = nrm2 > q99 ? 1.0 : 0.0;
      }
      sup[r] = std::sqrt(best);
    }
  });
  std::size_t exceed = 0;
  for (double v : sup) exceed += v > res.threshold;
  res.exceedance = static_cast<double>(exceed) / replications;
  res.se = binomial_se(res.exceedance, replications);
  res.within_bound = res.exceedance <= res.bound + 3.0 * res.se;
  std::vector<double> sorted = sup;
  std::sort(sorted.begin(), sorted.end());
  for (double q : {0.5, 0.9, 0.99}) {
    const auto idx = static_cast<std::size_t>(std::ceil(q * replications)) - 1;
    res.sup_quantiles.push_back(sorted[std::min(idx, sorted.size() - 1)]);
  }
  res.sup_quantiles.push_back(sorted.back());
  if (p0 > 0) {
    res.check_empirical = mean_of(tail);
    res.check_analytic = 0.01;
    res.check_se = binomial_se(res.check_empirical, tail.size());
  }
  return res;
}

// ---------------------------------------------------------------------------

namespace {

struct Minimum {
  Vector x;
  double f = kInf;
  bool converged = false;
};

// Quasi-Newton (BFGS, inverse-Hessian form) with Armijo backtracking.
Minimum bfgs_minimize(const std::function<double(const Vector&, Vector*)>& fn, Vector x, int max_iter = 500,
                      double grad_tol = 1e-10) {
  const auto p = x.size();
  Vector g(p);
  double f = fn(x, &g);
  Matrix h = Matrix::Identity(p, p);
  Minimum out;
  for (int it = 0; it < max_iter; ++it) {
    if (g.norm() <= grad_tol) {
      out.converged = true;
      break;
    }
    Vector dir = -h * g;
    if (dir.dot(g) >= 0.0) {
      h.setIdentity();
      dir = -g;
    }
    double t = 1.0, f_new = kInf;
    Vector x_new(p), g_new(p);
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      x_new = x + t * dir;
      f_new = fn(x_new, &g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * t * g.dot(dir)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      out.converged = g.norm() <= 1e-6;
      break;
    }
    const Vector sv = x_new - x, yv = g_new - g;
    const double sy = sv.dot(yv);
    const double df = f - f_new;
    x = x_new;
    g = g_new;
    f = f_new;
    if (sy > 1e-300) {
      if (it == 0) h *= sy / yv.squaredNorm();
      const double rho = 1.0 / sy;
      const Matrix left = Matrix::Identity(p, p) - rho * sv * yv.transpose();
      h = left * h * left.transpose() + rho * sv * sv.transpose();
    }
    if (df <= 1e-16 * std::max(1.0, std::abs(f)) && sv.norm() <= 1e-12 * (1.0 + x.norm())) {
      out.converged = true;
      break;
    }
  }
  out.x = x;
  out.f = f;
  return out;
}

}  // namespace

double renyi_objective(const Simulation& sim, double alpha, const Support& s, const Vector& b, Vector* grad) {
  const GroupedDesign& d = sim.design;
  const Vector eta0 = sim.truth_predictor();
  const Vector eta = s.empty() ? Vector::Zero(d.n()) : d.predictor(s, b);
  double total = 0.0;
  Vector deriv(d.n());
  for (int i = 0; i < d.n(); ++i) {
    total += sim.family.renyi_gap(alpha, eta(i), eta0(i), sim.tau(i));
    if (grad) deriv(i) = sim.family.renyi_gap_deta(alpha, eta(i), eta0(i), sim.tau(i));
  }
  const double n = static_cast<double>(d.n());
  if (grad) *grad = s.empty() ? Vector() : Vector(crossprod(d.columns(s), deriv) / n);
  return total / n;
}

RenyiTable renyi_separation(const Simulation& sim, double alpha, int s_max, const RenyiOptions& opt) {
  const GroupedDesign& d = sim.design;
  RenyiTable table;
  table.n = d.n();
  table.alpha = alpha;
  table.c_r = opt.c_r;
  std::vector<Support> supports;
  for (const Support& s : enumerate_supports(d.num_groups(), s_max))
    if (!is_subset(sim.truth.support, s)) supports.push_back(s);
  table.entries.resize(supports.size());

  const Vector eta0 = sim.truth_predictor();
  const Vector beta0 = sim.truth_ambient();
  // Value and eta-derivative of J_alpha share one link and two cumulant
  // evaluations once theta0 and b(theta0) are cached.
  Vector theta0(d.n()), b0(d.n());
  for (int i = 0; i < d.n(); ++i) {
    theta0(i) = sim.family.theta(eta0(i));
    b0(i) = sim.family.cumulant(theta0(i)).b;
  }
  auto objective = [&](const Matrix& xs, const Vector& b, Vector* grad) {
    const Vector eta = xs.cols() == 0 ? Vector::Zero(d.n()) : Vector(xs * b);
    double total = 0.0;
    Vector deriv(d.n());
    for (int i = 0; i < d.n(); ++i) {
      const Link l = sim.family.link(eta(i));
      const double ta = alpha * l.xi + (1.0 - alpha) * theta0(i);
      if (!sim.family.in_domain(ta)) throw DomainError("renyi_gap: convex combination outside the natural domain");
      const Cumulant c = sim.family.cumulant(l.xi), ca = sim.family.cumulant(ta);
      total += std::max(0.0, (alpha * c.b + (1.0 - alpha) * b0(i) - ca.b) / sim.tau(i));
      deriv(i) = alpha * l.xi1 * (c.b1 - ca.b1) / sim.tau(i);
    }
    if (grad) *grad = crossprod(xs, deriv) / static_cast<double>(d.n());
    return total / static_cast<double>(d.n());
  };

  parallel_for(supports.size(), [&](std::size_t k) {
    RenyiEntry& e = table.entries[k];
    e.support = supports[k];
    const Matrix xs = d.columns(e.support);
    const auto p = xs.cols();
    if (p == 0) {
      e.r = std::max(0.0, objective(xs, Vector(), nullptr));
      e.minimizer = Vector();
      return;
    }
    auto fn = [&](const Vector& b, Vector* g) {
      try {
        return objective(xs, b, g);
      } catch (const DomainError&) {
        return kInf;
      }
    };
    std::vector<Vector> starts;
    starts.push_back(Vector::Zero(p));
    starts.push_back(restrict_to(d, beta0, e.support).values);
    const Vector ls = (xs.transpose() * xs).ldlt().solve(xs.transpose() * eta0);
    starts.push_back(ls);
    Rng rng = make_stream(opt.seed, support_key(e.support));
    std::normal_distribution<double> nd;
    const double scale = 1.0 + ls.norm() / std::sqrt(static_cast<double>(p));
    while (static_cast<int>(starts.size()) < std::max(opt.restarts, 1)) {
      Vector v(p);
      for (Eigen::Index j = 0; j < p; ++j) v(j) = ls(j) + scale * nd(rng);
      starts.push_back(v);
    }
    starts.resize(std::max(opt.restarts, 1));
    Minimum best;
    bool any_converged = false;
    for (const Vector& x0 : starts) {
      if (!std::isfinite(fn(x0, nullptr))) continue;
      const Minimum m = bfgs_minimize(fn, x0);
      any_converged = any_converged || m.converged;
      if (m.f < best.f) best = m;
    }
    e.converged = any_converged;
    e.minimizer = best.x;
    e.r = std::max(0.0, best.f);
    if (p == 1 && (opt.grid_check || !e.converged)) {
      auto f1 = [&](double b) { return fn(Vector::Constant(1, b), nullptr); };
      const double bstar = e.minimizer.size() ? e.minimizer(0) : 0.0;
      const double range = 10.0 + 4.0 * std::abs(bstar) + 4.0 * eta0.cwiseAbs().maxCoeff();
      constexpr int kGrid = 2001;
      double gbest = kInf;
      int kbest = 0;
      std::vector<double> grid(kGrid);
      for (int j = 0; j < kGrid; ++j) {
        grid[j] = -range + 2.0 * range * j / (kGrid - 1);
        const double v = f1(grid[j]);
        if (v < gbest) {
          gbest = v;
          kbest = j;
        }
      }
      const double lo = grid[std::max(0, kbest - 1)], hi = grid[std::min(kGrid - 1, kbest + 1)];
      const auto [bx, bf] = boost::math::tools::brent_find_minima(f1, lo, hi, 52);
      e.grid_r = std::max(0.0, std::min(gbest, bf));
      if (!e.converged && e.grid_r < e.r) {
        e.r = e.grid_r;
        e.minimizer = Vector::Constant(1, bx);
      }
    }
  });

  std::vector<double> terms;
  const double log_g = std::log(static_cast<double>(d.num_groups()));
  const double s0 = static_cast<double>(sim.truth.support.size());
  for (const auto& e : table.entries) {
    const double ps = static_cast<double>(d.support_dim(e.support));
    terms.push_back(-d.n() * e.r + opt.c_r * ps + opt.c_r * (s0 + static_cast<double>(e.support.size())) * log_g);
  }
  table.summability = std::exp(log_sum_exp(terms));
  return table;
}

double average_hellinger_sq(const GlmFamily& family, const Vector& eta, const Vector& eta0, const Vector& tau) {
  if (eta.size() != eta0.size() || eta.size() != tau.size() || eta.size() == 0)
    throw DomainError("average_hellinger_sq: length mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) total += family.hellinger_sq(eta(i), eta0(i), tau(i));
  return total / static_cast<double>(eta.size());
}

std::vector<TrendRow> hellinger_contraction(const std::vector<Simulation>& sims, const SasPrior& prior,
                                            double alpha, const EngineSettings& engine,
                                            const ContractionOptions& opt, int replications, std::uint64_t seed) {
  std::vector<TrendRow> rows;
  for (std::size_t k = 0; k < sims.size(); ++k) {
    const Simulation& sim = sims[k];
    require_nonempty_truth(sim.truth, "hellinger_contraction");
    const Vector eta0 = sim.truth_predictor();
    const double eps_n = std::sqrt(sim.truth.support.size() * std::log(static_cast<double>(sim.design.num_groups())) /
                                   sim.design.n());
    const double cut = opt.k * eps_n;
    std::vector<double> mass(replications, kNaN);
    parallel_for(static_cast<std::size_t>(replications), [&](std::size_t r) {
      Rng rng = make_stream(seed ^ mix64(k), r);
      const Dataset data = sim.draw(rng);
      try {
        PosteriorOptions po = engine.posterior;
        po.summaries = true;
        const SupportPosterior sp = support_posterior(data, prior, alpha, engine.s_max, po);
        for (const auto& e : sp.entries)
          if (!e.support.empty() && !e.summary_ok && std::exp(e.log_weight) > 1e-6) return;
        SupportPosterior trimmed = sp;
        trimmed.entries.erase(std::remove_if(trimmed.entries.begin(), trimmed.entries.end(),
                                             [](const PosteriorEntry& e) {
                                               return !e.support.empty() && !e.summary_ok;
                                             }),
                              trimmed.entries.end());
        normalize(trimmed);
        const auto draws = sample_posterior(sim.design, trimmed, opt.draws, rng);
        std::size_t over = 0;
        for (const auto& dr : draws) {
          const Vector eta = sim.design.x() * dr.beta;
          over += std::sqrt(average_hellinger_sq(sim.family, eta, eta0, sim.tau)) > cut;
        }
        mass[r] = static_cast<double>(over) / draws.size();
      } catch (const SingularMatrix&) {
      }
    });
    TrendRow row;
    row.n = sim.design.n();
    std::vector<double> used;
    for (double v : mass) {
      if (std::isnan(v))
        ++row.excluded;
      else
        used.push_back(v);
    }
    row.value = mean_of(used);
    row.se = se_of(used);
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------

const AuditRow* DiagnosticsReport::find(std::string_view name) const {
  for (const auto& r : rows)
    if (r.name == name) return &r;
  return nullptr;
}

namespace {

// E|zeta|^power for zeta = xi'(eta) (Y - mu) / (tau sqrt(W)), W the Fisher weight.
double zeta_moment(const GlmFamily& f, double eta, double tau, double power) {
  const double mu = f.mean(eta);
  const double scale = f.link(eta).xi1 / (tau * std::sqrt(f.fisher_weight(eta, tau)));
  return f.expectation(eta, tau, [&](double y) { return std::pow(std::abs(scale * (y - mu)), power); });
}

}  // namespace

DiagnosticsReport assumption_audit(const Simulation& sim, const SasPrior& prior, const AuditOptions& opt) {
  const GroupedDesign& d = sim.design;
  const GlmFamily& fam = sim.family;
  DiagnosticsReport rep;
  auto& rows = rep.rows;
  auto add = [&](std::string name, double value, std::string relation, double margin, bool ok, std::string module) {
    rows.push_back({std::move(name), value, std::move(relation), margin, ok, std::move(module)});
  };
  // Runs `fn`; an exceeded enumeration budget or singular block yields a flagged NaN row.
  auto guarded = [&](const std::string& name, const std::string& module, auto fn) {
    try {
      fn();
    } catch (const BudgetExceeded&) {
      add(name, kNaN, "enumeration budget exceeded", kNaN, false, module);
    } catch (const SingularMatrix&) {
      add(name, kNaN, "singular Fisher block", kNaN, false, module);
    }
  };

  const int n = d.n(), g = d.num_groups();
  const int s0 = static_cast<int>(sim.truth.support.size());
  require_nonempty_truth(sim.truth, "assumption_audit");
  const double log_g = std::log(static_cast<double>(g));
  const int s_dagger = std::min((opt.k_dim + 1) * s0, g);
  const int s_star = std::min(s_dagger + s0, g);
  const int s_compat = std::min(opt.compat_s > 0 ? opt.compat_s : s0, g);
  const double eps_n = std::sqrt(s0 * log_g / n);
  const Vector eta0 = sim.truth_predictor();
  const double l_n = std::max(1.0, 2.0 * eta0.cwiseAbs().maxCoeff());
  double gamma_hi = 0.0, gamma_lo = kInf;
  for (int j = 0; j <= 4000; ++j) {
    const double eta = -l_n + 2.0 * l_n * j / 4000.0;
    const double w = fam.fisher_weight(eta, 1.0);
    gamma_hi = std::max(gamma_hi, w);
    gamma_lo = std::min(gamma_lo, w);
  }
  const double tau_lo = sim.tau.minCoeff();
  const double xn_s0 = sparse_row_envelope(d, s0);
  const double r_n0 = eps_n / (xn_s0 * std::sqrt(gamma_hi / tau_lo));
  Vector w0(n);
  for (int i = 0; i < n; ++i) w0(i) = fam.fisher_weight(eta0(i), sim.tau(i));

  add("n", n, "", kNaN, true, "experiments_io");
  add("G", g, "", kNaN, true, "design");
  add("s0", s0, "1 <= s0", s0 - 1.0, s0 >= 1, "design");
  add("s_dagger", s_dagger, "(K_dim + 1) s0", kNaN, true, "bvm_diagnostics");
  add("eps_n", eps_n, "sqrt(s0 log G / n)", kNaN, true, "bvm_diagnostics");
  add("L_n", l_n, "||X beta0||_inf <= L_n / 2", l_n / 2.0 - eta0.cwiseAbs().maxCoeff(), true, "glm_family");
  add("gamma_bar", gamma_hi, "sup_{|eta|<=L_n} (h^-1)' xi'", kNaN, true, "glm_family");
  add("gamma_under", gamma_lo, "inf_{|eta|<=L_n} (h^-1)' xi'", kNaN, gamma_lo > 0.0, "glm_family");
  add("eps_n_vs_window", eps_n / (l_n * std::sqrt(gamma_lo / tau_lo)), "eps_n < L_n sqrt(gamma_under/tau_-)",
      1.0 - eps_n / (l_n * std::sqrt(gamma_lo / tau_lo)), eps_n < l_n * std::sqrt(gamma_lo / tau_lo), "glm_family");
  add("x_n(s0)", xn_s0, "sparse row envelope", kNaN, true, "design");
  add("r_n0", r_n0, "eps_n / (x_n(s0) sqrt(gamma_bar/tau_-))", kNaN, r_n0 > 0.0, "bvm_diagnostics");

  double phi2 = kNaN;
  guarded("phi2", "design", [&] {
    phi2 = compatibility_phi2(d, w0, s_compat, opt.cap);
    add("phi2", phi2, "phi1 ^ phi2 >= a9 > 0", phi2, phi2 > 0.0, "design");
  });
  guarded("phi1", "design", [&] {
    Phi1Options po;
    po.restarts = 8;
    po.samples = 200;
    po.max_iter = 5000;
    po.seed = opt.seed;
    const Phi1Result r = compatibility_phi1(d, w0, s_compat, po, opt.cap);
    add("phi1", r.value, r.heuristic ? "phi1 >= a9 > 0 (heuristic minimum)" : "phi1 >= a9 > 0", r.value,
        r.value > 0.0, "design");
    add("phi1_sampled_upper", r.sampled_upper, "phi1 <= sampled value", r.sampled_upper - r.value,
        r.sampled_upper >= r.value - 1e-8, "design");
  });
  guarded("x_n(s_dagger)", "design", [&] {
    const double xd = sparse_row_envelope(d, s_dagger);
    add("x_n(s_dagger)", xd, "sparse row envelope", kNaN, true, "design");
  });
  {
    const double xs = sparse_row_envelope(d, s_compat);
    const double loc = xs * eps_n / phi2 * std::sqrt(gamma_hi / tau_lo);
    add("localization_product", loc, "x_n(s) eps_n phi2^-1 sqrt(gamma_bar/tau_-) <= a10 (audited against 1)",
        1.0 - loc, loc <= 1.0, "design");
  }
  {
    double bmin = kInf;
    for (std::size_t k = 0, off = 0; k < sim.truth.support.size(); ++k) {
      const int m = d.group_size(sim.truth.support[k]);
      bmin = std::min(bmin, sim.truth.values.segment(off, m).norm());
      off += m;
    }
    const double margin = bmin * phi2 / eps_n;
    add("beta_min_margin", margin, "min_g ||beta0_g|| phi2 / eps_n >= a11 (audited against 1)", margin - 1.0,
        margin >= 1.0, "bvm_diagnostics");
  }
  guarded("c_F", "design", [&] {
    const GramExtremes ge = sparse_gram_extremes(d, w0, s_dagger, opt.cap);
    add("c_F", ge.c_f, "sparse eigenvalue of F0/n bounded below", ge.c_f, ge.c_f > 0.0, "design");
    add("C_F", ge.C_f, "sparse eigenvalue of F0/n bounded above", kNaN, std::isfinite(ge.C_f), "design");
  });
  guarded("q_star", "design", [&] {
    const InfluenceLeverage il = sparse_influence_leverage(d, w0, s_star, opt.cap);
    const double prod = il.q_star * std::sqrt(s_dagger * log_g);
    add("q_star", il.q_star, "sparse influence norm at s_star", kNaN, true, "design");
    add("l_star", il.l_star, "weighted sparse leverage at s_star", kNaN, true, "design");
    add("q_star_sqrt_s_log_G", prod, "q_star sqrt(s_dagger log G) -> 0 (audited against 1)", 1.0 - prod,
        prod < 1.0, "design");
  });

  // Active-block Lindeberg quantities.
  guarded("kappa_n0", "restricted_fit", [&] {
    const Matrix xs0 = d.columns(sim.truth.support);
    const Matrix f0 = weighted_crossprod(xs0, w0);
    Eigen::LLT<Matrix> llt(f0);
    if (llt.info() != Eigen::Success) throw SingularMatrix("truth Fisher block");
    double kappa = 0.0;
    for (int i = 0; i < n; ++i) {
      const Vector row = xs0.row(i).transpose();
      kappa = std::max(kappa, std::sqrt(w0(i) * row.dot(llt.solve(row))));
    }
    add("kappa_n0", kappa, "kappa_n0 -> 0 (audited against 1)", 1.0 - kappa, kappa < 1.0, "restricted_fit");
  });
  {
    // zeta_i0 depends on i only through (eta0_i, tau_i); evaluate on distinct pairs.
    std::map<std::pair<double, double>, int> distinct;
    for (int i = 0; i < n; ++i) distinct.emplace(std::make_pair(eta0(i), sim.tau(i)), 0);
    std::vector<std::pair<double, double>> keys;
    for (const auto& kv : distinct) keys.push_back(kv.first);
    std::vector<double> var_dev(keys.size()), third(keys.size());
    parallel_for(keys.size(), [&](std::size_t k) {
      var_dev[k] = std::abs(zeta_moment(fam, keys[k].first, keys[k].second, 2.0) - 1.0);
      third[k] = zeta_moment(fam, keys[k].first, keys[k].second, 3.0);
    });
    const double vmax = *std::max_element(var_dev.begin(), var_dev.end());
    const double tmax = *std::max_element(third.begin(), third.end());
    add("zeta_variance_dev", vmax, "|E zeta^2 - 1| <= 1e-8", 1e-8 - vmax, vmax <= 1e-8, "glm_family");
    add("max_E_abs_zeta3", tmax, "sup_i E|zeta_i0|^3 <= K_act3", kNaN, std::isfinite(tmax), "glm_family");
  }

  // Prior block.
  PriorAuditOptions pao;
  pao.mc = opt.prior_mc;
  pao.seed = opt.seed ^ 0x9a;
  const PriorAudit pa = audit_prior_constants(prior, d, sim.truth, eps_n, r_n0, pao);
  add("log_support_mass_s0", pa.log_support_mass_s0, "log[pi(s0)/C(G,s0)] = -a_pi s0 log G", kNaN, true, "prior");
  add("a_pi", pa.a_pi, "implied exponent", kNaN, true, "prior");
  add("a3", pa.a3, "pi(s)/pi(s-1) >= G^-a3", kNaN, std::isfinite(pa.a3), "prior");
  add("a4", pa.a4, "pi(s)/pi(s-1) <= G^-a4", kNaN, std::isfinite(pa.a4), "prior");
  add("small_ball_mass", pa.small_ball.value, "slab mass of {||b - b0|| <= r_n0}", pa.small_ball.se,
      pa.small_ball.value > 0.0, "prior");
  const double a5 = -std::log(pa.small_ball.value) / (s0 * log_g);
  add("a5", a5, "small-ball mass >= G^{-a5 s0}", kNaN, std::isfinite(a5), "prior");
  add("slab_flatness", pa.flatness_sup, "sup |log phi(b)/phi(b0)| on the flatness ellipsoid", kNaN,
      std::isfinite(pa.flatness_sup), "prior");
  add("a6", pa.a6, "phi_g(0) <= exp(a6 m_g)", kNaN, std::isfinite(pa.a6), "prior");
  {
    const SieveMass sm = sieve_mass(prior, d, opt.sieve_c0, s0, l_n, opt.sieve_mc, opt.seed ^ 0x5e);
    add("sieve_mass", sm.estimate, "<= envelope bound + 3 se", sm.bound + 3.0 * sm.se - sm.estimate, sm.within_bound,
        "prior");
    add("sieve_bound", sm.bound, "sum_s pi(s) P(||b|| > L_n / x_n(s))", kNaN, true, "prior");
  }

  // Score envelope.
  const int s_score = std::min(s0, g);
  const double b_mgf = estimate_b_mgf(sim, s_score, opt.mgf_directions, opt.seed ^ 0xb);
  const double k_sc = 4.0 * std::sqrt(b_mgf * kKappa0);
  add("b_mgf", b_mgf, "sup log-mgf / lambda^2 on the window grid", kNaN, std::isfinite(b_mgf), "bvm_diagnostics");
  add("K_sc", k_sc, "4 sqrt(b_mgf (3 + log 5))", kNaN, std::isfinite(k_sc), "bvm_diagnostics");
  add("K_lb", pa.a_pi + a5 + 4.0 + 4.0 * b_mgf * kKappa0, "a_pi + a5 + 4 + 4 b_mgf (3 + log 5)", kNaN, true,
      "bvm_diagnostics");
  if (opt.score_replications > 0) {
    const ScoreEnvelopeResult se =
        score_envelope_experiment(sim, s_score, opt.score_replications, opt.seed ^ 0x5c, 1.0, b_mgf);
    add("K_sc_exceedance", se.exceedance, "<= 2 G^{-2s} + 3 se", se.bound + 3.0 * se.se - se.exceedance,
        se.within_bound, "bvm_diagnostics");
  }

  if (opt.renyi) {
    rep.renyi = renyi_separation(sim, opt.alpha, std::min(opt.renyi_s_max, g));
    double rmin = kInf;
    bool all_converged = true;
    for (const auto& e : rep.renyi.entries) {
      rmin = std::min(rmin, e.r);
      all_converged = all_converged && e.converged;
    }
    add("renyi_min", rmin, "R_{alpha,n}(S) > 0 for S not containing S0", rmin, rmin > 0.0 && all_converged,
        "bvm_diagnostics");
    add("renyi_summability", rep.renyi.summability,
        "sum exp{-nR + C_R p_S + C_R (s0 + |S|) log G} -> 0 (audited against 1)", 1.0 - rep.renyi.summability,
        rep.renyi.summability < 1.0, "bvm_diagnostics");
  }
  return rep;
}

}  // namespace sbvm
