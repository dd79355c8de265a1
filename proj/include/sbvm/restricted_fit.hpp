#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "sbvm/design.hpp"
#include "sbvm/glm_family.hpp"
#include "sbvm/numeric.hpp"

namespace sbvm {

// Log-likelihood restricted to the columns of one support. The carrier
// k(y, tau) is dropped, so values are comparable only within one dataset.
// References are held; the caller keeps family, design, tau and y alive.
class RestrictedModel {
 public:
  RestrictedModel(const GlmFamily& family, const GroupedDesign& design, const Vector& tau,
                  const Vector& y, Support support);

  const GlmFamily& family() const { return *family_; }
  const GroupedDesign& design() const { return *design_; }
  const Vector& tau() const { return *tau_; }
  const Vector& y() const { return *y_; }
  const Support& support() const { return support_; }
  const Matrix& xs() const { return xs_; }
  int dim() const { return static_cast<int>(xs_.cols()); }

  Vector predictor(const Vector& beta_s) const;
  double loglik(const Vector& beta_s) const;

  struct Derivatives {
    double l;
    Vector g;
    Matrix h;  // observed information, -d^2 l
  };
  Derivatives loglik_grad_hess(const Vector& beta_s) const;
  // X_S^T diag(w(eta)) X_S with the Fisher weights of the family.
  Matrix expected_information(const Vector& beta_s) const;

 private:
  const GlmFamily* family_;
  const GroupedDesign* design_;
  const Vector* tau_;
  const Vector* y_;
  Support support_;
  Matrix xs_;
};

struct NewtonOptions {
  int max_iter = 200;
  double grad_tol = 1e-8;
  double param_tol = 1e-10;
  // Iterates beyond this Euclidean norm with a non-vanishing gradient are
  // reported as separated.
  double separation_cap = 1e2;
};

struct FitResult {
  Vector beta_hat;
  double loglik = 0.0;
  Matrix observed_info;
  double grad_norm = 0.0;
  bool converged = false;
  bool boundary_hit = false;
  bool separated = false;
  bool info_pd = false;
  int iterations = 0;
  // Objective value at the start and after every accepted step.
  std::vector<double> trace;
};

// Ellipsoid {b : ||M^{1/2}(b - center)|| <= radius}. An infinite radius
// leaves the problem unconstrained.
struct Ellipsoid {
  Vector center;
  Matrix metric;
  double radius = std::numeric_limits<double>::infinity();
};

// Maximizes a smooth objective supplied as (value, gradient, negative Hessian)
// by damped Newton with Armijo backtracking. Falls back to `fallback_info`
// (when given) or gradient ascent if the negative Hessian is not p.d.
using ObjectiveFn = std::function<RestrictedModel::Derivatives(const Vector&)>;
using InfoFn = std::function<Matrix(const Vector&)>;
FitResult newton_maximize(const ObjectiveFn& objective, const Vector& init, const NewtonOptions& opt,
                          const Ellipsoid* region = nullptr, const InfoFn& fallback_info = {});

FitResult restricted_mle(const RestrictedModel& model, const Vector& init, const Ellipsoid* region = nullptr,
                         const NewtonOptions& opt = {});

struct PopulationCenter {
  Vector beta_circ;
  Matrix fisher_circ;
  bool converged = false;
};

// Maximizer of E l_S, obtained by replacing y with mu0 = b'(xi(X beta0)).
PopulationCenter pseudo_true_center(const GlmFamily& family, const GroupedDesign& design,
                                    const Vector& tau, const Support& support, const Vector& beta0,
                                    const Ellipsoid* region = nullptr, const NewtonOptions& opt = {});

// Population mean vector mu0_i = b'(xi(x_i^T beta0)).
Vector population_mean(const GlmFamily& family, const GroupedDesign& design, const Vector& beta0);

// Z_S = (F^o)^{-1/2} grad l_S(beta^o) with the symmetric root.
Vector normalized_score(const RestrictedModel& model, const PopulationCenter& center);

// |l(b) - l(b^o) - (b - b^o)^T grad l(b^o) + (1/2)(b - b^o)^T F^o (b - b^o)|
// at b = b^o + (F^o)^{-1/2} h.
double lan_remainder(const RestrictedModel& model, const PopulationCenter& center, const Vector& h);

struct SchurProjection {
  double excess;  // Gbar^T Fbar^{-1} Gbar
  double direct;  // G^T F^{-1} G - G0^T F00^{-1} G0
  Vector gbar;
  Matrix fbar;
};
SchurProjection schur_projection(const Matrix& f, const Vector& g, int p0);

}  // namespace sbvm
