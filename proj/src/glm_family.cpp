#include "sbvm/glm_family.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sbvm/error.hpp"
#include "sbvm/numeric.hpp"

namespace sbvm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCountMass = 1.0 - 1e-12;
constexpr long kCountLimit = 50'000'000;

}  // namespace

std::string_view to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::gaussian: return "gaussian";
    case FamilyKind::logistic: return "logistic";
    case FamilyKind::poisson: return "poisson";
    case FamilyKind::probit: return "probit";
    case FamilyKind::gamma_log: return "gamma_log";
    case FamilyKind::negbin_log: return "negbin_log";
  }
  return "unknown";
}

FamilyKind parse_family_kind(std::string_view name) {
  for (FamilyKind k : {FamilyKind::gaussian, FamilyKind::logistic, FamilyKind::poisson,
                       FamilyKind::probit, FamilyKind::gamma_log, FamilyKind::negbin_log}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown family '" + std::string(name) + "'");
}

GlmFamily::GlmFamily(FamilyKind kind, double size_r) : kind_(kind), r_(size_r) {
  if (kind_ == FamilyKind::negbin_log && !(r_ > 0.0 && std::isfinite(r_)))
    throw DomainError("negbin_log size r must be positive");
}

std::string GlmFamily::name() const { return std::string(to_string(kind_)); }

bool GlmFamily::canonical() const {
  return kind_ == FamilyKind::gaussian || kind_ == FamilyKind::logistic || kind_ == FamilyKind::poisson;
}

bool GlmFamily::discrete() const {
  return kind_ != FamilyKind::gaussian && kind_ != FamilyKind::gamma_log;
}

double GlmFamily::domain_upper() const {
  return (kind_ == FamilyKind::gamma_log || kind_ == FamilyKind::negbin_log) ? 0.0 : kInf;
}

bool GlmFamily::in_domain(double theta) const {
  return std::isfinite(theta) && theta < domain_upper();
}

bool GlmFamily::valid_observation(double y) const {
  if (!std::isfinite(y)) return false;
  switch (kind_) {
    case FamilyKind::gaussian: return true;
    case FamilyKind::logistic:
    case FamilyKind::probit: return y == 0.0 || y == 1.0;
    case FamilyKind::poisson:
    case FamilyKind::negbin_log: return y >= 0.0 && y == std::floor(y);
    case FamilyKind::gamma_log: return y > 0.0;
  }
  return false;
}

void GlmFamily::require_unit_tau(double tau, const char* op) const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError(std::string(op) + ": tau must be positive");
  if (discrete() && tau != 1.0)
    throw DomainError(std::string(op) + ": " + name() + " requires tau = 1");
}

Cumulant GlmFamily::cumulant(double theta) const {
  if (!in_domain(theta)) throw DomainError(name() + ": theta outside the natural domain");
  switch (kind_) {
    case FamilyKind::gaussian: return {0.5 * theta * theta, theta, 1.0};
    case FamilyKind::logistic:
    case FamilyKind::probit: {
      const double p = sigmoid(theta);
      return {log1pexp(theta), p, p * sigmoid(-theta)};
    }
    case FamilyKind::poisson: {
      const double e = std::exp(theta);
      return {e, e, e};
    }
    case FamilyKind::gamma_log: return {-std::log(-theta), -1.0 / theta, 1.0 / (theta * theta)};
    case FamilyKind::negbin_log: {
      const double e = std::exp(theta);
      const double om = -std::expm1(theta);
      return {-r_ * std::log(om), r_ * e / om, r_ * e / (om * om)};
    }
  }
  return {0.0, 0.0, 0.0};
}

Link GlmFamily::link(double eta) const {
  if (!std::isfinite(eta)) throw DomainError(name() + ": eta must be finite");
  switch (kind_) {
    case FamilyKind::gaussian:
    case FamilyKind::logistic:
    case FamilyKind::poisson: return {eta, 1.0, 0.0};
    case FamilyKind::probit: {
      const double xi = log_normal_cdf(eta) - log_normal_cdf(-eta);
      const double rp = inverse_mills(eta);
      const double rm = inverse_mills(-eta);
      // d/deta of phi/Phi(-eta) and phi/Phi(eta), written to avoid cancellation.
      const double xi2 = rp * mills_excess(eta) - rm * mills_excess(-eta);
      return {xi, rp + rm, xi2};
    }
    case FamilyKind::gamma_log: {
      const double e = std::exp(-eta);
      return {-e, e, -e};
    }
    case FamilyKind::negbin_log: {
      const double lr = std::log(r_);
      const double q = sigmoid(lr - eta);
      return {eta - lr - log1pexp(eta - lr), q, -q * sigmoid(eta - lr)};
    }
  }
  return {0.0, 0.0, 0.0};
}

double GlmFamily::mean(double eta) const {
  switch (kind_) {
    case FamilyKind::gaussian: return eta;
    case FamilyKind::logistic: return sigmoid(eta);
    case FamilyKind::probit: return normal_cdf(eta);
    case FamilyKind::poisson:
    case FamilyKind::gamma_log:
    case FamilyKind::negbin_log: return std::exp(eta);
  }
  return 0.0;
}

double GlmFamily::variance(double eta, double tau) const {
  switch (kind_) {
    case FamilyKind::gaussian: return tau;
    case FamilyKind::logistic: return tau * sigmoid(eta) * sigmoid(-eta);
    case FamilyKind::probit: return tau * normal_cdf(eta) * normal_cdf(-eta);
    case FamilyKind::poisson: return tau * std::exp(eta);
    case FamilyKind::gamma_log: return tau * std::exp(2.0 * eta);
    case FamilyKind::negbin_log: {
      const double mu = std::exp(eta);
      return tau * mu * (r_ + mu) / r_;
    }
  }
  return 0.0;
}

double GlmFamily::fisher_weight(double eta, double tau) const {
  if (!(tau > 0.0)) throw DomainError("fisher_weight: tau must be positive");
  switch (kind_) {
    case FamilyKind::gaussian:
    case FamilyKind::gamma_log: return 1.0 / tau;
    case FamilyKind::logistic: return sigmoid(eta) * sigmoid(-eta) / tau;
    case FamilyKind::probit: return inverse_mills(eta) * inverse_mills(-eta) / tau;
    case FamilyKind::poisson: return std::exp(eta) / tau;
    case FamilyKind::negbin_log: return r_ * sigmoid(eta - std::log(r_)) / tau;
  }
  return 0.0;
}

double GlmFamily::log_density(double y, double eta, double tau) const {
  require_unit_tau(tau, "log_density");
  if (!valid_observation(y)) throw DomainError(name() + ": invalid observation");
  switch (kind_) {
    case FamilyKind::gaussian: {
      const double d = y - eta;
      return -0.5 * d * d / tau - 0.5 * (kLog2Pi + std::log(tau));
    }
    case FamilyKind::logistic: return y == 1.0 ? -log1pexp(-eta) : -log1pexp(eta);
    case FamilyKind::probit: return y == 1.0 ? log_normal_cdf(eta) : log_normal_cdf(-eta);
    case FamilyKind::poisson: return y * eta - std::exp(eta) - std::lgamma(y + 1.0);
    case FamilyKind::gamma_log: {
      const double k = 1.0 / tau;
      return k * (-y * std::exp(-eta) - eta) + (k - 1.0) * std::log(y) + k * std::log(k) -
             std::lgamma(k);
    }
    case FamilyKind::negbin_log: {
      const double lr = std::log(r_);
      const double log_r_plus_mu = lr + log1pexp(eta - lr);
      return y * (eta - log_r_plus_mu) + r_ * (lr - log_r_plus_mu) + std::lgamma(y + r_) -
             std::lgamma(r_) - std::lgamma(y + 1.0);
    }
  }
  return 0.0;
}

double GlmFamily::sample(double eta, double tau, Rng& rng) const {
  require_unit_tau(tau, "sample");
  switch (kind_) {
    case FamilyKind::gaussian: return std::normal_distribution<double>(eta, std::sqrt(tau))(rng);
    case FamilyKind::logistic: return std::bernoulli_distribution(sigmoid(eta))(rng) ? 1.0 : 0.0;
    case FamilyKind::probit: return std::bernoulli_distribution(normal_cdf(eta))(rng) ? 1.0 : 0.0;
    case FamilyKind::poisson:
      return static_cast<double>(std::poisson_distribution<long long>(std::exp(eta))(rng));
    case FamilyKind::gamma_log:
      return std::gamma_distribution<double>(1.0 / tau, tau * std::exp(eta))(rng);
    case FamilyKind::negbin_log: {
      const double lambda = std::gamma_distribution<double>(r_, std::exp(eta) / r_)(rng);
      if (!(lambda > 0.0)) return 0.0;
      return static_cast<double>(std::poisson_distribution<long long>(lambda)(rng));
    }
  }
  return 0.0;
}

double GlmFamily::renyi_gap(double alpha, double eta, double eta0, double tau) const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("renyi_gap: alpha must lie in (0, 1)");
  if (!(tau > 0.0)) throw DomainError("renyi_gap: tau must be positive");
  if (eta == eta0) return 0.0;
  const double t = theta(eta);
  const double t0 = theta(eta0);
  const double ta = alpha * t + (1.0 - alpha) * t0;
  if (!in_domain(ta)) throw DomainError("renyi_gap: convex combination outside the natural domain");
  const double j = (alpha * cumulant(t).b + (1.0 - alpha) * cumulant(t0).b - cumulant(ta).b) / tau;
  return std::max(0.0, j);
}

double GlmFamily::renyi_gap_deta(double alpha, double eta, double eta0, double tau) const {
  const Link l = link(eta);
  const double ta = alpha * l.xi + (1.0 - alpha) * theta(eta0);
  return alpha * l.xi1 * (cumulant(l.xi).b1 - cumulant(ta).b1) / tau;
}

double GlmFamily::hellinger_sq(double eta, double eta0, double tau) const {
  require_unit_tau(tau, "hellinger_sq");
  return -2.0 * std::expm1(-renyi_gap(0.5, eta, eta0, tau));
}

double GlmFamily::centered_log_mgf(double eta, double tau, double t) const {
  const double t0 = theta(eta);
  const double t1 = t0 + t * tau;
  if (!in_domain(t1)) return kInf;
  const Cumulant c0 = cumulant(t0);
  return (cumulant(t1).b - c0.b) / tau - t * c0.b1;
}

double GlmFamily::expectation(double eta, double tau, const std::function<double(double)>& f,
                              double* remainder) const {
  require_unit_tau(tau, "expectation");
  if (remainder) *remainder = 0.0;
  switch (kind_) {
    case FamilyKind::logistic:
    case FamilyKind::probit: {
      const double p1 = std::exp(log_density(1.0, eta, tau));
      const double p0 = std::exp(log_density(0.0, eta, tau));
      return p0 * f(0.0) + p1 * f(1.0);
    }
    case FamilyKind::poisson:
    case FamilyKind::negbin_log: {
      const double mu = mean(eta);
      double mass = 0.0;
      double acc = 0.0;
      for (long y = 0; y < kCountLimit; ++y) {
        const double p = std::exp(log_density(static_cast<double>(y), eta, tau));
        mass += p;
        if (p > 0.0) acc += p * f(static_cast<double>(y));
        if (mass >= kCountMass && static_cast<double>(y) > mu) {
          if (remainder) *remainder = std::max(0.0, 1.0 - mass);
          return acc;
        }
      }
      throw BudgetExceeded("expectation: count summation did not reach the mass target");
    }
    case FamilyKind::gaussian: {
      const double sd = std::sqrt(tau);
      return integrate_real_line([&](double z) { return f(eta + sd * z) * normal_pdf(z); }, 0.0);
    }
    case FamilyKind::gamma_log: {
      // y = mu * u; u has a Gamma(k, rate k) law.
      const double mu = std::exp(eta);
      const double k = 1.0 / tau;
      const double lc = k * std::log(k) - std::lgamma(k);
      auto g = [&](double u) {
        if (!(u > 0.0)) return 0.0;
        const double ld = lc + (k - 1.0) * std::log(u) - k * u;
        return ld < -745.0 ? 0.0 : f(mu * u) * std::exp(ld);
      };
      return integrate_interval(g, 0.0, 1.0) + integrate_upper(g, 1.0);
    }
  }
  return 0.0;
}

void validate_dispersion(const std::vector<double>& tau) {
  for (double t : tau)
    if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("dispersion entries must be positive and finite");
}

}  // namespace sbvm
