#include "sbvm/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "sbvm/error.hpp"
#include "sbvm/parallel.hpp"

namespace sbvm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::uint64_t support_key(const Support& s) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (int g : s) h = mix64(h ^ static_cast<std::uint64_t>(g + 1));
  return h;
}

}  // namespace

std::string_view to_string(CenterMode m) {
  switch (m) {
    case CenterMode::mle: return "mle";
    case CenterMode::score_quadratic: return "score_quadratic";
    case CenterMode::posterior_mode: return "posterior_mode";
  }
  return "unknown";
}

std::string_view to_string(MarginalMode m) { return m == MarginalMode::exact ? "exact" : "laplace"; }

std::string_view to_string(ExactMethod m) {
  switch (m) {
    case ExactMethod::none: return "none";
    case ExactMethod::gauss_hermite: return "gauss_hermite";
    case ExactMethod::importance: return "importance";
  }
  return "unknown";
}

CenterMode parse_center_mode(std::string_view s) {
  for (CenterMode m : {CenterMode::mle, CenterMode::score_quadratic, CenterMode::posterior_mode})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown center mode '" + std::string(s) + "'");
}

MarginalMode parse_marginal_mode(std::string_view s) {
  if (s == "exact") return MarginalMode::exact;
  if (s == "laplace") return MarginalMode::laplace;
  throw ConfigError("unknown marginal mode '" + std::string(s) + "'");
}

PosteriorProblem::PosteriorProblem(const Dataset& data, const SasPrior& prior, double alpha, double loglik_scale)
    : data_(&data), prior_(&prior), alpha_(alpha), scale_(loglik_scale) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0, 1]");
  if (!(loglik_scale > 0.0)) throw DomainError("loglik_scale must be positive");
  if (prior.num_groups() != data.design.num_groups())
    throw DomainError("prior and design disagree on the number of groups");
  if (data.truth) {
    const RestrictedModel m(data.family, data.design, data.tau, data.y, data.truth->support);
    l_ref_ = m.loglik(data.truth->values);
  } else {
    const RestrictedModel m(data.family, data.design, data.tau, data.y, {});
    l_ref_ = m.loglik(Vector());
  }
}

RestrictedModel PosteriorProblem::model(const Support& s) const {
  return RestrictedModel(data_->family, data_->design, data_->tau, data_->y, s);
}

double PosteriorProblem::log_integrand(const RestrictedModel& m, const Vector& b) const {
  return temper() * (m.loglik(b) - l_ref_) + prior_->log_slab_density(m.support(), b);
}

RestrictedModel::Derivatives PosteriorProblem::integrand_derivatives(const RestrictedModel& m,
                                                                     const Vector& b) const {
  auto d = m.loglik_grad_hess(b);
  Vector gs;
  Matrix hs;
  prior_->slab_derivatives(m.support(), b, gs, hs);
  d.l = temper() * (d.l - l_ref_) + prior_->log_slab_density(m.support(), b);
  d.g = temper() * d.g + gs;
  d.h = temper() * d.h - hs;
  return d;
}

LaplaceExpansion posterior_mode_expansion(const PosteriorProblem& pb, const RestrictedModel& m,
                                          const NewtonOptions& opt) {
  LaplaceExpansion out;
  const int p = m.dim();
  if (p == 0) {
    out.log_q = pb.temper() * (m.loglik(Vector()) - pb.l_ref());
    out.ok = true;
    return out;
  }
  const FitResult fit = newton_maximize(
      [&](const Vector& b) { return pb.integrand_derivatives(m, b); }, Vector::Zero(p), opt, nullptr,
      [&](const Vector& b) {
        Vector gs;
        Matrix hs;
        pb.prior().slab_derivatives(m.support(), b, gs, hs);
        return Matrix(pb.temper() * m.expected_information(b) - hs);
      });
  out.center = fit.beta_hat;
  out.precision = fit.observed_info;
  out.ok = fit.info_pd && !fit.separated;
  if (!out.ok)
    throw SingularMatrix("posterior-mode expansion failed on support " + format_support(m.support()));
  out.log_q = fit.loglik + 0.5 * p * kLog2Pi - 0.5 * log_det_pd(out.precision, "posterior-mode Hessian");
  return out;
}

double laplace_log_marginal(const PosteriorProblem& pb, const RestrictedModel& m, CenterMode mode,
                            const NewtonOptions& opt) {
  const int p = m.dim();
  const double t = pb.temper();
  if (p == 0) return t * (m.loglik(Vector()) - pb.l_ref());
  switch (mode) {
    case CenterMode::posterior_mode: return posterior_mode_expansion(pb, m, opt).log_q;
    case CenterMode::mle: {
      const FitResult fit = restricted_mle(m, Vector::Zero(p), nullptr, opt);
      if (!fit.info_pd || fit.separated)
        throw SingularMatrix("observed information not positive definite on support " +
                             format_support(m.support()));
      return t * (fit.loglik - pb.l_ref()) + 0.5 * p * kLog2Pi -
             0.5 * log_det_pd(t * fit.observed_info, "observed information") +
             pb.prior().log_slab_density(m.support(), fit.beta_hat);
    }
    case CenterMode::score_quadratic: {
      const Dataset& d = pb.data();
      const Vector beta0 = d.truth_ambient();
      const Vector b0 = restrict_to(d.design, beta0, m.support()).values;
      const Vector eta0 = d.design.x() * beta0;
      Vector w(eta0.size()), sw(eta0.size());
      for (Eigen::Index i = 0; i < eta0.size(); ++i) {
        w(i) = d.family.fisher_weight(eta0(i), d.tau(i));
        sw(i) = d.family.link(eta0(i)).xi1 / d.tau(i) * (d.y(i) - d.family.mean(eta0(i)));
      }
      const Matrix f0 = weighted_crossprod(m.xs(), w);
      const Vector delta = crossprod(m.xs(), sw);
      Eigen::LLT<Matrix> llt(f0);
      if (llt.info() != Eigen::Success)
        throw SingularMatrix("truth Fisher block singular on support " + format_support(m.support()));
      return t * (m.loglik(b0) - pb.l_ref()) + 0.5 * t * delta.dot(llt.solve(delta)) + 0.5 * p * kLog2Pi -
             0.5 * log_det_pd(t * f0, "truth Fisher block") + pb.prior().log_slab_density(m.support(), b0);
    }
  }
  return kNegInf;
}

MarginalEstimate exact_log_marginal(const PosteriorProblem& pb, const RestrictedModel& m, const ExactOptions& opt,
                                    const LaplaceExpansion* expansion) {
  MarginalEstimate out;
  out.support = m.support();
  LaplaceExpansion local;
  if (!expansion) {
    local = posterior_mode_expansion(pb, m);
    expansion = &local;
  }
  out.log_laplace = expansion->log_q;
  const int p = m.dim();
  if (p == 0) {
    out.log_exact = expansion->log_q;
    return out;
  }
  const Matrix l = cholesky_lower(expansion->precision, "posterior-mode Hessian");
  const auto ut = l.transpose().triangularView<Eigen::Upper>();
  const double half_logdet = l.diagonal().array().log().sum();
  auto beta_of = [&](const Vector& z) { return Vector(expansion->center + ut.solve(z)); };

  if (p <= opt.max_gh_dim) {
    out.exact_method = ExactMethod::gauss_hermite;
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (int level : opt.gh_levels) {
      const QuadratureRule& rule = gauss_hermite(level);
      long total = 1;
      for (int k = 0; k < p; ++k) total *= level;
      std::vector<double> terms(total);
      std::vector<int> idx(p, 0);
      Vector z(p);
      for (long node = 0; node < total; ++node) {
        double logw = 0.0;
        for (int k = 0; k < p; ++k) {
          z(k) = rule.nodes[idx[k]];
          logw += std::log(rule.weights[idx[k]]);
        }
        terms[node] = logw + pb.log_integrand(m, beta_of(z)) + 0.5 * z.squaredNorm();
        for (int k = 0; k < p; ++k) {
          if (++idx[k] < level) break;
          idx[k] = 0;
        }
      }
      const double value = log_sum_exp(terms) - half_logdet + 0.5 * p * kLog2Pi;
      out.gh_level = level;
      out.draws = total;
      if (std::isfinite(prev)) out.exact_se = std::abs(value - prev);
      out.log_exact = value;
      if (std::isfinite(prev) && std::abs(value - prev) <= opt.gh_tol) {
        out.reliable = true;
        return out;
      }
      prev = value;
    }
    out.reliable = false;
    return out;
  }

  out.exact_method = ExactMethod::importance;
  Rng rng = make_stream(opt.seed, support_key(m.support()));
  std::normal_distribution<double> nd;
  std::vector<double> logw(opt.is_draws);
  Vector z(p);
  for (long k = 0; k < opt.is_draws; ++k) {
    for (int j = 0; j < p; ++j) z(j) = nd(rng);
    const double log_q = -0.5 * z.squaredNorm() - 0.5 * p * kLog2Pi + half_logdet;
    logw[k] = pb.log_integrand(m, beta_of(z)) - log_q;
  }
  const double lse = log_sum_exp(logw);
  double s1 = 0.0, s2 = 0.0;
  for (double v : logw) {
    const double w = std::exp(v - lse);
    s1 += w;
    s2 += w * w;
  }
  const double nd_draws = static_cast<double>(opt.is_draws);
  out.draws = opt.is_draws;
  out.ess = s1 * s1 / s2;
  out.log_exact = lse - std::log(nd_draws);
  // Delta-method s.e. of the log of a sample mean.
  const double mean_w = s1 / nd_draws;
  const double var_w = std::max(0.0, s2 / nd_draws - mean_w * mean_w);
  out.exact_se = std::sqrt(var_w / nd_draws) / mean_w;
  out.reliable = out.ess >= opt.min_ess;
  return out;
}

double SupportPosterior::weight(const Support& s) const {
  const PosteriorEntry* e = find(s);
  return e ? std::exp(e->log_weight) : 0.0;
}

const PosteriorEntry* SupportPosterior::find(const Support& s) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), s,
                             [](const PosteriorEntry& e, const Support& key) { return e.support < key; });
  return (it != entries.end() && it->support == s) ? &*it : nullptr;
}

void normalize(SupportPosterior& sp) {
  std::vector<double> lw;
  lw.reserve(sp.entries.size());
  for (const auto& e : sp.entries) lw.push_back(e.log_weight);
  const double z = log_sum_exp(lw);
  if (!std::isfinite(z)) throw DomainError("support posterior has no finite weight");
  for (auto& e : sp.entries) e.log_weight -= z;
  sp.normalized = true;
}

SupportPosterior support_posterior(const Dataset& data, const SasPrior& prior, double alpha, int s_max,
                                   const PosteriorOptions& opt) {
  const PosteriorProblem pb(data, prior, alpha, opt.loglik_scale);
  const auto supports = enumerate_supports(data.design.num_groups(), s_max, opt.cap);
  SupportPosterior sp;
  sp.alpha = alpha;
  sp.entries.resize(supports.size());
  const bool need_expansion = opt.mode == MarginalMode::exact || opt.center == CenterMode::posterior_mode;

  parallel_for(supports.size(), [&](std::size_t k) {
    PosteriorEntry& e = sp.entries[k];
    e.support = supports[k];
    const RestrictedModel m = pb.model(e.support);
    if (need_expansion) e.expansion = posterior_mode_expansion(pb, m, opt.newton);
    e.marginal.support = e.support;
    e.marginal.log_laplace = opt.center == CenterMode::posterior_mode
                                 ? e.expansion.log_q
                                 : laplace_log_marginal(pb, m, opt.center, opt.newton);
    e.marginal.log_exact = e.marginal.log_laplace;
    e.log_marginal = e.marginal.log_laplace;
    if (m.dim() == 0) {
      e.summary_ok = true;
    } else if (opt.summaries) {
      const Vector init = need_expansion ? e.expansion.center : Vector::Zero(m.dim());
      const FitResult fit = restricted_mle(m, init, nullptr, opt.newton);
      e.separated = fit.separated;
      e.summary_ok = fit.converged && !fit.separated && fit.info_pd;
      e.mean = fit.beta_hat;
      e.precision = pb.temper() * fit.observed_info;
    }
  });

  if (opt.mode == MarginalMode::exact) {
    std::vector<double> lw(supports.size());
    for (std::size_t k = 0; k < supports.size(); ++k)
      lw[k] = prior.log_support_mass(supports[k]) + sp.entries[k].marginal.log_laplace;
    const double z = log_sum_exp(lw);
    const double floor = opt.exact_weight_floor > 0.0 ? std::log(opt.exact_weight_floor) : kNegInf;
    std::vector<std::size_t> todo;
    for (std::size_t k = 0; k < supports.size(); ++k)
      if (lw[k] - z >= floor) todo.push_back(k);
    parallel_for(todo.size(), [&](std::size_t j) {
      PosteriorEntry& e = sp.entries[todo[j]];
      const RestrictedModel m = pb.model(e.support);
      e.marginal = exact_log_marginal(pb, m, opt.exact, &e.expansion);
      e.log_marginal = e.marginal.log_exact;
    });
  }
  for (auto& e : sp.entries) e.log_weight = prior.log_support_mass(e.support) + e.log_marginal;
  normalize(sp);
  return sp;
}

SupportPosterior mixture_weights(const Dataset& data, const SasPrior& prior, double alpha, int s_max, int k_dim,
                                 std::size_t cap) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0, 1]");
  const PaddedVector& truth = data.require_truth();
  const GroupedDesign& d = data.design;
  const int g = d.num_groups();
  const int s0 = static_cast<int>(truth.support.size());
  const int limit = std::min({s_max, k_dim * std::max(s0, 1), g});
  if (limit < s0) throw DomainError("mixture truncation excludes the true support");

  std::vector<int> rest;
  for (int j = 0; j < g; ++j)
    if (!std::binary_search(truth.support.begin(), truth.support.end(), j)) rest.push_back(j);
  std::vector<Support> supports;
  for (const Support& t : enumerate_supports(static_cast<int>(rest.size()), limit - s0, cap)) {
    Support s = truth.support;
    for (int j : t) s.push_back(rest[j]);
    std::sort(s.begin(), s.end());
    supports.push_back(std::move(s));
  }
  std::sort(supports.begin(), supports.end());

  const Vector beta0 = embed(d, truth);
  const Vector eta0 = d.x() * beta0;
  Vector w(eta0.size()), sw(eta0.size());
  for (Eigen::Index i = 0; i < eta0.size(); ++i) {
    w(i) = data.family.fisher_weight(eta0(i), data.tau(i));
    sw(i) = data.family.link(eta0(i)).xi1 / data.tau(i) * (data.y(i) - data.family.mean(eta0(i)));
  }
  const Matrix full_f = weighted_gram(d, w);
  const Vector full_delta = crossprod(d.x(), sw);

  SupportPosterior sp;
  sp.alpha = alpha;
  sp.entries.resize(supports.size());
  parallel_for(supports.size(), [&](std::size_t k) {
    PosteriorEntry& e = sp.entries[k];
    e.support = supports[k];
    const auto idx = d.column_indices(e.support);
    const Matrix f = principal_block(full_f, idx);
    Vector delta(static_cast<Eigen::Index>(idx.size())), b0(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      delta(j) = full_delta(idx[j]);
      b0(j) = beta0(idx[j]);
    }
    Eigen::LLT<Matrix> llt(f);
    if (llt.info() != Eigen::Success || !is_positive_definite(f))
      throw SingularMatrix("truth Fisher block singular on support " + format_support(e.support));
    const Vector step = llt.solve(delta);
    const double p = static_cast<double>(idx.size());
    e.log_marginal = prior.log_slab_density(e.support, b0) + 0.5 * p * (kLog2Pi - std::log(alpha)) -
                     0.5 * log_det_pd(f, "truth Fisher block") + 0.5 * alpha * delta.dot(step);
    e.log_weight = prior.log_support_mass(e.support) + e.log_marginal;
    e.mean = b0 + step;
    e.precision = alpha * f;
    e.summary_ok = true;
  });
  normalize(sp);
  return sp;
}

OracleLaw oracle_law(const Dataset& data, double alpha) {
  const PaddedVector& truth = data.require_truth();
  if (truth.support.empty()) throw DomainError("oracle law needs a nonempty true support");
  const RestrictedModel m(data.family, data.design, data.tau, data.y, truth.support);
  const Vector eta0 = m.predictor(truth.values);
  Vector w(eta0.size()), sw(eta0.size());
  for (Eigen::Index i = 0; i < eta0.size(); ++i) {
    w(i) = data.family.fisher_weight(eta0(i), data.tau(i));
    sw(i) = data.family.link(eta0(i)).xi1 / data.tau(i) * (data.y(i) - data.family.mean(eta0(i)));
  }
  const Matrix f = weighted_crossprod(m.xs(), w);
  const Vector delta = crossprod(m.xs(), sw);
  OracleLaw out;
  out.support = truth.support;
  out.mean = truth.values + f.llt().solve(delta);
  out.precision = alpha * f;
  out.covariance = inverse_pd(out.precision, "oracle precision");
  return out;
}

Support posterior_mode_support(const SupportPosterior& sp) {
  if (sp.entries.empty()) throw DomainError("empty support posterior");
  std::size_t best = 0;
  for (std::size_t k = 1; k < sp.entries.size(); ++k)
    if (sp.entries[k].log_weight > sp.entries[best].log_weight) best = k;
  return sp.entries[best].support;
}

Vector sample_gaussian(const Vector& mean, const Matrix& precision, Rng& rng) {
  const auto p = mean.size();
  if (p == 0) return mean;
  std::normal_distribution<double> nd;
  Vector z(p);
  for (Eigen::Index j = 0; j < p; ++j) z(j) = nd(rng);
  const Matrix l = cholesky_lower(precision, "precision");
  return mean + l.transpose().triangularView<Eigen::Upper>().solve(z);
}

double log_gaussian_density(const Vector& x, const Vector& mean, const Matrix& precision) {
  const auto p = x.size();
  if (p == 0) return 0.0;
  const Vector d = x - mean;
  return -0.5 * p * kLog2Pi + 0.5 * log_det_pd(precision, "precision") - 0.5 * d.dot(precision * d);
}

namespace {

std::discrete_distribution<std::size_t> weight_distribution(const SupportPosterior& sp) {
  std::vector<double> w;
  w.reserve(sp.entries.size());
  for (const auto& e : sp.entries) w.push_back(std::exp(e.log_weight));
  return std::discrete_distribution<std::size_t>(w.begin(), w.end());
}

}  // namespace

std::vector<PosteriorDraw> sample_posterior(const GroupedDesign& design, const SupportPosterior& sp, int k,
                                            Rng& rng) {
  if (!sp.normalized) throw DomainError("sample_posterior needs a normalized posterior");
  auto pick = weight_distribution(sp);
  std::vector<PosteriorDraw> out;
  out.reserve(k);
  for (int r = 0; r < k; ++r) {
    const std::size_t idx = pick(rng);
    const PosteriorEntry& e = sp.entries[idx];
    if (!e.summary_ok) throw DomainError("no Gaussian summary on support " + format_support(e.support));
    out.push_back({idx, embed(design, {e.support, sample_gaussian(e.mean, e.precision, rng)})});
  }
  return out;
}

ExactSampleResult sample_exact_posterior(const PosteriorProblem& pb, const SupportPosterior& sp, int k, Rng& rng) {
  if (!sp.normalized) throw DomainError("sample_exact_posterior needs a normalized posterior");
  const GroupedDesign& design = pb.data().design;
  auto pick = weight_distribution(sp);
  std::map<std::size_t, double> log_envelope;
  ExactSampleResult out;
  long proposals = 0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int r = 0; r < k; ++r) {
    const std::size_t idx = pick(rng);
    const PosteriorEntry& e = sp.entries[idx];
    const RestrictedModel m = pb.model(e.support);
    if (m.dim() == 0) {
      out.draws.push_back({idx, Vector::Zero(design.p())});
      ++proposals;
      continue;
    }
    const LaplaceExpansion& ex = e.expansion;
    auto log_ratio = [&](const Vector& b) {
      return pb.log_integrand(m, b) - e.log_marginal - log_gaussian_density(b, ex.center, ex.precision);
    };
    auto it = log_envelope.find(idx);
    if (it == log_envelope.end()) {
      double mx = kNegInf;
      for (int j = 0; j < 200; ++j) mx = std::max(mx, log_ratio(sample_gaussian(ex.center, ex.precision, rng)));
      it = log_envelope.emplace(idx, mx + std::log(1.5)).first;
    }
    while (true) {
      ++proposals;
      const Vector b = sample_gaussian(ex.center, ex.precision, rng);
      const double lr = log_ratio(b);
      if (lr > it->second) it->second = lr;
      if (std::log(unif(rng)) <= lr - it->second) {
        out.draws.push_back({idx, embed(design, {e.support, b})});
        break;
      }
      if (proposals > 1000L * (r + 1)) {
        out.flagged = true;
        out.acceptance = static_cast<double>(out.draws.size()) / proposals;
        return out;
      }
    }
  }
  out.acceptance = proposals ? static_cast<double>(out.draws.size()) / proposals : 1.0;
  out.flagged = out.acceptance < 1e-3;
  return out;
}

}  // namespace sbvm
