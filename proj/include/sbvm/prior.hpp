#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "sbvm/design.hpp"
#include "sbvm/numeric.hpp"
#include "sbvm/rng.hpp"

namespace sbvm {

enum class SizePriorKind { complexity, beta_binomial };

// Prior on the number of active groups, s = 0..G.
//   complexity:     pi(s) proportional to c^{-s} G^{-A s}
//   beta_binomial:  s | t ~ Bin(G, t), t ~ Beta(1, G^u)
class SizePrior {
 public:
  static SizePrior complexity(int num_groups, double c, double a);
  static SizePrior beta_binomial(int num_groups, double u);

  SizePriorKind kind() const { return kind_; }
  int num_groups() const { return g_; }
  double c() const { return c_; }
  double a() const { return a_; }
  double u() const { return u_; }

  double log_mass(int s) const;
  const std::vector<double>& log_masses() const { return log_mass_; }

 private:
  SizePrior(SizePriorKind kind, int g, double c, double a, double u);

  SizePriorKind kind_;
  int g_;
  double c_ = 1.0, a_ = 1.0, u_ = 2.0;
  std::vector<double> log_mass_;
};

inline double log_size_mass(const SizePrior& p, int s) { return p.log_mass(s); }

enum class SlabKind { group_gaussian, group_laplace };

// Per-group slab density on R^m:
//   group_gaussian: N(0, sigma2 I_m)
//   group_laplace:  c_{m,lambda} exp(-lambda ||b||_2),
//                   c_{m,lambda} = lambda^m Gamma(m/2) / (2 pi^{m/2} Gamma(m))
struct Slab {
  SlabKind kind = SlabKind::group_gaussian;
  double sigma2 = 1.0;
  double lambda = 1.0;

  static Slab gaussian(double sigma2) { return {SlabKind::group_gaussian, sigma2, 1.0}; }
  static Slab laplace(double lambda) { return {SlabKind::group_laplace, 1.0, lambda}; }

  double log_normalizer(int m) const;
  double log_group_density(const Eigen::Ref<const Vector>& b) const;
  // Adds the gradient and Hessian of log_group_density at b into the given
  // blocks. The Laplace Hessian is undefined at b = 0; the zero matrix is used.
  void add_group_derivatives(const Eigen::Ref<const Vector>& b, Eigen::Ref<Vector> grad,
                             Eigen::Ref<Matrix> hess) const;
  Vector sample_group(int m, Rng& rng) const;
};

std::string_view to_string(SizePriorKind k);
std::string_view to_string(SlabKind k);

class SasPrior {
 public:
  SasPrior(SizePrior size, Slab slab, std::vector<int> group_sizes);

  const SizePrior& size() const { return size_; }
  const Slab& slab() const { return slab_; }
  const std::vector<int>& group_sizes() const { return group_sizes_; }
  int num_groups() const { return static_cast<int>(group_sizes_.size()); }

  double log_slab_density(const Support& s, const Vector& beta_s) const;
  // Gradient and Hessian of log_slab_density.
  void slab_derivatives(const Support& s, const Vector& beta_s, Vector& grad, Matrix& hess) const;
  Vector sample_slab(const Support& s, Rng& rng) const;
  // log[pi(|S|) / C(G, |S|)]
  double log_support_mass(const Support& s) const;
  double log_joint(const Support& s, const Vector& beta_s) const;

 private:
  int support_dim(const Support& s) const;

  SizePrior size_;
  Slab slab_;
  std::vector<int> group_sizes_;
};

inline double log_slab_density(const SasPrior& p, const Support& s, const Vector& b) {
  return p.log_slab_density(s, b);
}
inline double log_joint_prior(const SasPrior& p, const Support& s, const Vector& b) {
  return p.log_joint(s, b);
}

struct MassEstimate {
  double value;
  double se;
  // True when no Monte Carlo draw hit the event; value is then 3/mc and is
  // an upper bound only.
  bool upper_bound_only;
};

struct PriorAuditOptions {
  int mc = 20000;
  std::uint64_t seed = 0xa0d17;
  // Metric for the flatness ellipsoid {b : ||M^{1/2}(b - b0)|| <= radius};
  // identity when empty.
  Matrix metric;
  double flatness_radius = 1.0;
  int flatness_rays = 256;
};

struct PriorAudit {
  int s0;
  double log_support_mass_s0;  // log[pi(s0)/C(G,s0)]
  double a_pi;                 // implied by log mass = -a_pi s0 log G
  double a3;                   // pi(s)/pi(s-1) >= G^{-a3} for all s
  double a4;                   // pi(s)/pi(s-1) <= G^{-a4} for all s
  MassEstimate small_ball;
  double r_n0;
  double eps_n;
  double flatness_sup;
  double flatness_radius;
  double a6;
  std::uint64_t seed;
};

PriorAudit audit_prior_constants(const SasPrior& prior, const GroupedDesign& design,
                                 const PaddedVector& truth, double eps_n, double r_n0,
                                 const PriorAuditOptions& opt = {});

// sup over the flatness ellipsoid of |log phi_S(b) - log phi_S(b0)|, found
// along deterministic rays; nondecreasing in `radius`.
double slab_flatness(const SasPrior& prior, const PaddedVector& truth, const Matrix& metric,
                     double radius, int rays, std::uint64_t seed);

struct SieveMass {
  double estimate;
  double se;
  double bound;
  bool within_bound;  // estimate <= bound + 3 se
};

// Monte Carlo estimate of Pi(s_beta <= C0 s0, ||X beta||_inf > L_n), compared
// with the envelope bound sum_s pi(s) P(||b||_2 > L_n / row_envelope(s)).
SieveMass sieve_mass(const SasPrior& prior, const GroupedDesign& design, double c0, int s0,
                     double l_n, int mc, std::uint64_t seed = 0x51e7e);

// Uniformly random support of the given size, sorted.
Support sample_support(int num_groups, int size, Rng& rng);

}  // namespace sbvm
