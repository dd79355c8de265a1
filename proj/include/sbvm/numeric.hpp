#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace sbvm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;
inline constexpr double kPi = 3.14159265358979323846264338327950288;

// log(sum_i exp(v_i)); -inf for an empty span or all -inf entries.
double log_sum_exp(std::span<const double> v);

// log(1 + e^x) without overflow.
double log1pexp(double x);
// 1 / (1 + e^-x).
double sigmoid(double x);

double normal_pdf(double x);
double normal_cdf(double x);
// log Phi(x); uses a continued-fraction tail for x < -8.
double log_normal_cdf(double x);
// Inverse Mills ratio phi(x) / Phi(-x).
double inverse_mills(double x);
// inverse_mills(x) - x, accurate for large positive x.
double mills_excess(double x);

double chi2_quantile(double df, double p);
double chi2_cdf(double df, double x);
double chi2_survival(double df, double x);
double gamma_survival(double shape, double rate, double x);

double log_choose(double n, double k);

// Probabilists' Gauss-Hermite rule: sum_k w_k f(z_k) approximates E f(Z) for
// Z ~ N(0, 1). Nodes from the Golub-Welsch eigenproblem, cached per order.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const QuadratureRule& gauss_hermite(int order);

// Adaptive quadrature wrappers (Boost.Math). Each returns the integral and
// writes the error estimate when `error` is non-null.
// integrate_real_line splits at `center`; integrate_upper covers (a, inf);
// integrate_interval uses tanh-sinh and tolerates endpoint singularities.
double integrate_real_line(const std::function<double(double)>& f, double center = 0.0,
                           double tol = 1e-12, double* error = nullptr);
double integrate_upper(const std::function<double(double)>& f, double a, double tol = 1e-12,
                       double* error = nullptr);
double integrate_interval(const std::function<double(double)>& f, double a, double b,
                          double tol = 1e-12, double* error = nullptr);
// Adaptive Gauss-Kronrod on [a, b]; suited to integrands with kinks.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double tol = 1e-10, double* error = nullptr);

// Symmetric positive-definite helpers. All throw SingularMatrix when the
// argument is not numerically positive definite; `what` names the object.
double log_det_pd(const Matrix& a, const char* what = "matrix");
Matrix inverse_pd(const Matrix& a, const char* what = "matrix");
// Symmetric eigen-decomposition roots A^{1/2} and A^{-1/2}.
Matrix sym_sqrt(const Matrix& a);
Matrix sym_inv_sqrt(const Matrix& a, const char* what = "matrix");
bool is_positive_definite(const Matrix& a);
// Lower Cholesky factor of a p.d. matrix.
Matrix cholesky_lower(const Matrix& a, const char* what = "matrix");

}  // namespace sbvm
