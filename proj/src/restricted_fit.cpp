#include "sbvm/restricted_fit.hpp"

#include <cmath>

#include "sbvm/error.hpp"

namespace sbvm {

RestrictedModel::RestrictedModel(const GlmFamily& family, const GroupedDesign& design, const Vector& tau,
                                 const Vector& y, Support support)
    : family_(&family), design_(&design), tau_(&tau), y_(&y), support_(std::move(support)) {
  design.validate_support(support_);
  if (tau.size() != design.n() || y.size() != design.n())
    throw DomainError("response and dispersion must have one entry per design row");
  xs_ = design.columns(support_);
}

Vector RestrictedModel::predictor(const Vector& beta_s) const {
  if (beta_s.size() != xs_.cols()) throw DomainError("coefficient length does not match support");
  if (xs_.cols() == 0) return Vector::Zero(xs_.rows());
  return xs_ * beta_s;
}

double RestrictedModel::loglik(const Vector& beta_s) const {
  const Vector eta = predictor(beta_s);
  const Vector& y = *y_;
  const Vector& tau = *tau_;
  double l = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double th = family_->theta(eta(i));
    l += (y(i) * th - family_->cumulant(th).b) / tau(i);
  }
  return l;
}

RestrictedModel::Derivatives RestrictedModel::loglik_grad_hess(const Vector& beta_s) const {
  const Vector eta = predictor(beta_s);
  const Vector& y = *y_;
  const Vector& tau = *tau_;
  const auto n = eta.size();
  Vector score_w(n), hess_w(n);
  double l = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Link lk = family_->link(eta(i));
    const Cumulant c = family_->cumulant(lk.xi);
    const double resid = y(i) - c.b1;
    l += (y(i) * lk.xi - c.b) / tau(i);
    score_w(i) = lk.xi1 * resid / tau(i);
    hess_w(i) = (c.b2 * lk.xi1 * lk.xi1 - lk.xi2 * resid) / tau(i);
  }
  return {l, crossprod(xs_, score_w), weighted_crossprod(xs_, hess_w)};
}

Matrix RestrictedModel::expected_information(const Vector& beta_s) const {
  const Vector eta = predictor(beta_s);
  Vector w(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) w(i) = family_->fisher_weight(eta(i), (*tau_)(i));
  return weighted_crossprod(xs_, w);
}

namespace {

struct Projector {
  const Ellipsoid* region = nullptr;
  Matrix root;
  Matrix inv_root;

  explicit Projector(const Ellipsoid* r) : region(r) {
    if (active()) {
      root = sym_sqrt(r->metric);
      inv_root = sym_inv_sqrt(r->metric, "ellipsoid metric");
    }
  }
  bool active() const { return region && std::isfinite(region->radius); }
  double scaled_norm(const Vector& b) const { return (root * (b - region->center)).norm(); }
  Vector project(const Vector& b, bool* clipped) const {
    if (clipped) *clipped = false;
    if (!active()) return b;
    const Vector h = root * (b - region->center);
    const double nh = h.norm();
    if (nh <= region->radius) return b;
    if (clipped) *clipped = true;
    return region->center + inv_root * (h * (region->radius / nh));
  }
};

bool try_eval(const ObjectiveFn& f, const Vector& b, RestrictedModel::Derivatives& out) {
  try {
    out = f(b);
  } catch (const DomainError&) {
    return false;
  }
  return std::isfinite(out.l) && out.g.allFinite() && out.h.allFinite();
}

}  // namespace

FitResult newton_maximize(const ObjectiveFn& objective, const Vector& init, const NewtonOptions& opt,
                          const Ellipsoid* region, const InfoFn& fallback_info) {
  const Projector proj(region);
  FitResult res;
  Vector beta = proj.project(init, nullptr);
  RestrictedModel::Derivatives d;
  if (!try_eval(objective, beta, d)) throw DomainError("objective not finite at the starting point");
  res.trace.push_back(d.l);

  // With H p.d., both the Newton decrement g^T H^{-1} g and the Newton step
  // must be small: along a separating ray the decrement decays but the step
  // does not.
  auto stationary = [&](const RestrictedModel::Derivatives& v, const Vector& at) {
    const double tol = opt.grad_tol * (1.0 + std::abs(v.l));
    Eigen::LLT<Matrix> llt(v.h);
    if (v.h.size() > 0 && llt.info() == Eigen::Success) {
      const Vector step = llt.solve(v.g);
      return v.g.dot(step) <= tol * opt.grad_tol && step.norm() <= 1e-4 * (1.0 + at.norm());
    }
    return v.g.norm() <= tol;
  };

  for (res.iterations = 0; res.iterations < opt.max_iter; ++res.iterations) {
    const double gnorm = d.g.norm();
    if (stationary(d, beta)) {
      res.converged = true;
      break;
    }
    if (beta.norm() > opt.separation_cap) {
      res.separated = true;
      break;
    }
    Matrix h = d.h;
    if (!is_positive_definite(h) && fallback_info) h = fallback_info(beta);
    Vector step;
    if (is_positive_definite(h)) {
      step = h.llt().solve(d.g);
    } else {
      const double scale = std::max(1.0, d.h.diagonal().cwiseAbs().maxCoeff());
      step = d.g / scale;
    }

    double t = 1.0;
    bool accepted = false;
    Vector cand;
    RestrictedModel::Derivatives dc;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      cand = proj.project(beta + t * step, nullptr);
      if (!try_eval(objective, cand, dc)) continue;
      const double gain = d.g.dot(cand - beta);
      const bool armijo = dc.l >= d.l + 1e-4 * std::max(0.0, gain);
      const bool flat = dc.l >= d.l - 1e-13 * (1.0 + std::abs(d.l)) && dc.g.norm() < gnorm;
      if (armijo || flat) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const double delta = (cand - beta).norm();
    beta = std::move(cand);
    d = std::move(dc);
    res.trace.push_back(d.l);
    if (delta <= opt.param_tol * (1.0 + beta.norm())) {
      res.converged = true;
      ++res.iterations;
      break;
    }
  }
  if (!res.converged && !res.separated && stationary(d, beta)) res.converged = true;

  res.beta_hat = beta;
  res.loglik = d.l;
  res.observed_info = d.h;
  res.grad_norm = d.g.norm();
  res.info_pd = is_positive_definite(d.h);
  res.boundary_hit = proj.active() && proj.scaled_norm(beta) >= region->radius * (1.0 - 1e-9);
  return res;
}

FitResult restricted_mle(const RestrictedModel& model, const Vector& init, const Ellipsoid* region,
                         const NewtonOptions& opt) {
  if (model.dim() == 0) throw DomainError("restricted_mle: empty support has no free coefficients");
  if (init.size() != model.dim()) throw DomainError("restricted_mle: init length does not match support");
  return newton_maximize([&](const Vector& b) { return model.loglik_grad_hess(b); }, init, opt, region,
                         [&](const Vector& b) { return model.expected_information(b); });
}

Vector population_mean(const GlmFamily& family, const GroupedDesign& design, const Vector& beta0) {
  if (beta0.size() != design.p()) throw DomainError("truth length does not match design");
  const Vector eta = design.x() * beta0;
  Vector mu(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) mu(i) = family.mean(eta(i));
  return mu;
}

PopulationCenter pseudo_true_center(const GlmFamily& family, const GroupedDesign& design, const Vector& tau,
                                    const Support& support, const Vector& beta0, const Ellipsoid* region,
                                    const NewtonOptions& opt) {
  const Vector mu0 = population_mean(family, design, beta0);
  const RestrictedModel pop(family, design, tau, mu0, support);
  if (pop.dim() == 0) throw DomainError("pseudo_true_center: empty support");
  const Vector init = restrict_to(design, beta0, support).values;
  const FitResult fit = restricted_mle(pop, init, region, opt);
  PopulationCenter out;
  out.beta_circ = fit.beta_hat;
  out.fisher_circ = pop.loglik_grad_hess(fit.beta_hat).h;
  out.converged = fit.converged;
  if (!is_positive_definite(out.fisher_circ))
    throw SingularMatrix("population Fisher block singular on support " + format_support(support));
  return out;
}

Vector normalized_score(const RestrictedModel& model, const PopulationCenter& center) {
  if (model.dim() == 0) throw DomainError("normalized_score: empty support");
  const Vector g = model.loglik_grad_hess(center.beta_circ).g;
  return sym_inv_sqrt(center.fisher_circ, "population Fisher block") * g;
}

double lan_remainder(const RestrictedModel& model, const PopulationCenter& center, const Vector& h) {
  const Vector delta = sym_inv_sqrt(center.fisher_circ, "population Fisher block") * h;
  const auto d0 = model.loglik_grad_hess(center.beta_circ);
  const double l1 = model.loglik(center.beta_circ + delta);
  return std::abs(l1 - d0.l - delta.dot(d0.g) + 0.5 * delta.dot(center.fisher_circ * delta));
}

SchurProjection schur_projection(const Matrix& f, const Vector& g, int p0) {
  const auto p = f.rows();
  if (f.cols() != p || g.size() != p || p0 < 0 || p0 > p)
    throw DomainError("schur_projection: inconsistent block sizes");
  const auto q = p - p0;
  const Matrix f00 = f.topLeftCorner(p0, p0);
  const Vector g0 = g.head(p0);
  SchurProjection out;
  if (p0 > 0) {
    Eigen::LLT<Matrix> llt0(f00);
    if (llt0.info() != Eigen::Success || !is_positive_definite(f00))
      throw SingularMatrix("schur_projection: leading block not positive definite");
    const Matrix f10 = f.bottomLeftCorner(q, p0);
    out.gbar = g.tail(q) - f10 * llt0.solve(g0);
    out.fbar = f.bottomRightCorner(q, q) - f10 * llt0.solve(f10.transpose());
    out.direct = g.dot(f.llt().solve(g)) - g0.dot(llt0.solve(g0));
  } else {
    out.gbar = g;
    out.fbar = f;
    out.direct = g.dot(f.llt().solve(g));
  }
  out.excess = q > 0 ? out.gbar.dot(out.fbar.llt().solve(out.gbar)) : 0.0;
  return out;
}

}  // namespace sbvm
