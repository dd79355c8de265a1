#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "sbvm/rng.hpp"

namespace sbvm {

enum class FamilyKind { gaussian, logistic, poisson, probit, gamma_log, negbin_log };

std::string_view to_string(FamilyKind kind);
FamilyKind parse_family_kind(std::string_view name);

struct Cumulant {
  double b;
  double b1;
  double b2;
};

struct Link {
  double xi;
  double xi1;
  double xi2;
};

// Exponential family with density exp{(y*theta - b(theta))/tau + k(y, tau)}
// and natural parameter theta = xi(eta) for the linear predictor eta.
//
// The discrete families (logistic, probit, poisson, negbin_log) are only
// proper densities at tau = 1. log_density, sample, hellinger_sq and
// expectation reject other dispersions for them; the likelihood-level
// formulas (cumulant, fisher_weight, renyi_gap) accept any tau > 0.
class GlmFamily {
 public:
  explicit GlmFamily(FamilyKind kind, double size_r = 1.0);

  static GlmFamily gaussian() { return GlmFamily(FamilyKind::gaussian); }
  static GlmFamily logistic() { return GlmFamily(FamilyKind::logistic); }
  static GlmFamily poisson() { return GlmFamily(FamilyKind::poisson); }
  static GlmFamily probit() { return GlmFamily(FamilyKind::probit); }
  static GlmFamily gamma_log() { return GlmFamily(FamilyKind::gamma_log); }
  static GlmFamily negbin_log(double r) { return GlmFamily(FamilyKind::negbin_log, r); }

  FamilyKind kind() const { return kind_; }
  double size_r() const { return r_; }
  std::string name() const;

  bool canonical() const;
  bool discrete() const;
  // Open natural domain of theta: (lo, hi).
  double domain_upper() const;
  bool in_domain(double theta) const;
  bool valid_observation(double y) const;

  Cumulant cumulant(double theta) const;
  Link link(double eta) const;
  double theta(double eta) const { return link(eta).xi; }
  // b'(xi(eta)), evaluated without passing through theta.
  double mean(double eta) const;
  // Var Y = tau * b''(xi(eta)).
  double variance(double eta, double tau) const;

  double fisher_weight(double eta, double tau) const;
  double log_density(double y, double eta, double tau) const;
  double sample(double eta, double tau, Rng& rng) const;

  // J_alpha = {alpha b(theta) + (1-alpha) b(theta0) - b(alpha theta + (1-alpha) theta0)} / tau
  double renyi_gap(double alpha, double eta, double eta0, double tau) const;
  // d J_alpha / d eta.
  double renyi_gap_deta(double alpha, double eta, double eta0, double tau) const;
  // Squared Hellinger distance 2 (1 - exp(-J_{1/2})).
  double hellinger_sq(double eta, double eta0, double tau) const;

  // log E exp{t (Y - mu)} = (b(theta + t tau) - b(theta)) / tau - t mu; +inf
  // when theta + t tau leaves the natural domain.
  double centered_log_mgf(double eta, double tau, double t) const;

  // E f(Y) by exact summation (counts truncated at cumulative mass 1 - 1e-12)
  // or adaptive quadrature. `remainder` receives the truncated mass.
  double expectation(double eta, double tau, const std::function<double(double)>& f,
                     double* remainder = nullptr) const;

 private:
  void require_unit_tau(double tau, const char* op) const;

  FamilyKind kind_;
  double r_;
};

// Free-function spellings of the operations.
inline Cumulant eval_cumulant(const GlmFamily& f, double theta) { return f.cumulant(theta); }
inline Link eval_link(const GlmFamily& f, double eta) { return f.link(eta); }

// Throws DomainError unless every tau_i is finite and positive.
void validate_dispersion(const std::vector<double>& tau);

}  // namespace sbvm
