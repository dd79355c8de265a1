#include "sbvm/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "sbvm/error.hpp"

namespace sbvm {

double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double log1pexp(double x) {
  if (x > 35.0) return x + std::exp(-x);
  if (x < -35.0) return std::exp(x);
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double normal_pdf(double x) { return std::exp(-0.5 * x * x - 0.5 * kLog2Pi); }

double normal_cdf(double x) { return 0.5 * boost::math::erfc(-x / std::sqrt(2.0)); }

double mills_excess(double x) {
  // phi(x)/Phi(-x) = x + K with K = 1/(x + 2/(x + 3/(x + ...))), valid for x > 0.
  if (x < 8.0) {
    return normal_pdf(x) / normal_cdf(-x) - x;
  }
  double t = x;
  for (int k = 60; k >= 2; --k) t = x + k / t;
  return 1.0 / t;
}

double inverse_mills(double x) {
  if (x >= 8.0) return x + mills_excess(x);
  return normal_pdf(x) / normal_cdf(-x);
}

double log_normal_cdf(double x) {
  if (x < -8.0) {
    // Phi(x) = phi(x) / (|x| + K(|x|))
    const double ax = -x;
    return -0.5 * x * x - 0.5 * kLog2Pi - std::log(ax + mills_excess(ax));
  }
  if (x > 5.0) return std::log1p(-normal_cdf(-x));
  return std::log(normal_cdf(x));
}

double chi2_quantile(double df, double p) {
  if (df <= 0.0) return 0.0;
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(df), p);
}

double chi2_cdf(double df, double x) {
  if (df <= 0.0) return x >= 0.0 ? 1.0 : 0.0;
  if (x <= 0.0) return 0.0;
  return boost::math::cdf(boost::math::chi_squared_distribution<double>(df), x);
}

double chi2_survival(double df, double x) {
  if (df <= 0.0) return x >= 0.0 ? 0.0 : 1.0;
  if (x <= 0.0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(df), x));
}

double gamma_survival(double shape, double rate, double x) {
  if (x <= 0.0) return 1.0;
  return boost::math::cdf(
      boost::math::complement(boost::math::gamma_distribution<double>(shape, 1.0 / rate), x));
}

double log_choose(double n, double k) {
  if (k < 0.0 || k > n) return -std::numeric_limits<double>::infinity();
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

const QuadratureRule& gauss_hermite(int order) {
  static std::mutex mu;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;
  if (order < 1) throw DomainError("Gauss-Hermite order must be positive");
  // Jacobi matrix of the probabilists' Hermite polynomials: off-diagonal sqrt(k).
  Matrix jac = Matrix::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    jac(k, k - 1) = std::sqrt(static_cast<double>(k));
    jac(k - 1, k) = jac(k, k - 1);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(jac);
  QuadratureRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  double total = 0.0;
  for (int k = 0; k < order; ++k) {
    rule.nodes[k] = es.eigenvalues()(k);
    const double v = es.eigenvectors()(0, k);
    rule.weights[k] = v * v;
    total += rule.weights[k];
  }
  for (double& w : rule.weights) w /= total;
  return cache.emplace(order, std::move(rule)).first->second;
}

double integrate_upper(const std::function<double(double)>& f, double a, double tol, double* error) {
  boost::math::quadrature::exp_sinh<double> integrator;
  double err = 0.0;
  double l1 = 0.0;
  const double value = integrator.integrate(f, a, std::numeric_limits<double>::infinity(), tol, &err, &l1);
  if (error) *error = err;
  return value;
}

double integrate_real_line(const std::function<double(double)>& f, double center, double tol,
                           double* error) {
  double e1 = 0.0, e2 = 0.0;
  const double upper = integrate_upper(f, center, tol, &e1);
  const double lower = integrate_upper([&](double t) { return f(2.0 * center - t); }, center, tol, &e2);
  if (error) *error = e1 + e2;
  return upper + lower;
}

double integrate_interval(const std::function<double(double)>& f, double a, double b, double tol,
                          double* error) {
  if (!(b > a)) {
    if (error) *error = 0.0;
    return 0.0;
  }
  boost::math::quadrature::tanh_sinh<double> integrator;
  double err = 0.0;
  double l1 = 0.0;
  const double value = integrator.integrate(f, a, b, tol, &err, &l1);
  if (error) *error = err;
  return value;
}

double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double tol,
                          double* error) {
  double err = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 25, tol, &err);
  if (error) *error = err;
  return value;
}

double log_det_pd(const Matrix& a, const char* what) {
  if (a.size() == 0) return 0.0;
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw SingularMatrix(std::string(what) + " is not positive definite");
  const auto& l = llt.matrixLLT();
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) > 0.0)) throw SingularMatrix(std::string(what) + " is not positive definite");
    s += std::log(l(i, i));
  }
  return 2.0 * s;
}

Matrix inverse_pd(const Matrix& a, const char* what) {
  if (a.size() == 0) return a;
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw SingularMatrix(std::string(what) + " is not positive definite");
  Matrix inv = llt.solve(Matrix::Identity(a.rows(), a.cols()));
  return 0.5 * (inv + inv.transpose());
}

Matrix sym_sqrt(const Matrix& a) {
  if (a.size() == 0) return a;
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  Vector d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

Matrix sym_inv_sqrt(const Matrix& a, const char* what) {
  if (a.size() == 0) return a;
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  const Vector& ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (!(ev.minCoeff() > 1e-14 * scale)) throw SingularMatrix(std::string(what) + " is not positive definite");
  Vector d = ev.cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

bool is_positive_definite(const Matrix& a) {
  if (a.size() == 0) return true;
  if (!a.allFinite()) return false;
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) return false;
  const auto& l = llt.matrixLLT();
  for (Eigen::Index i = 0; i < l.rows(); ++i)
    if (!(l(i, i) > 0.0)) return false;
  return true;
}

Matrix cholesky_lower(const Matrix& a, const char* what) {
  if (a.size() == 0) return a;
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw SingularMatrix(std::string(what) + " is not positive definite");
  return llt.matrixL();
}

}  // namespace sbvm
