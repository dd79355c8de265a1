#include "sbvm/prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "sbvm/error.hpp"

namespace sbvm {

SizePrior::SizePrior(SizePriorKind kind, int g, double c, double a, double u)
    : kind_(kind), g_(g), c_(c), a_(a), u_(u) {
  if (g_ < 1) throw DomainError("size prior needs G >= 1");
  log_mass_.resize(g_ + 1);
  const double lg = std::log(static_cast<double>(g_));
  if (kind_ == SizePriorKind::complexity) {
    if (!(c_ > 0.0) || !(a_ > 0.0)) throw DomainError("complexity prior needs c > 0 and A > 0");
    for (int s = 0; s <= g_; ++s) log_mass_[s] = -s * (std::log(c_) + a_ * lg);
  } else {
    if (!(u_ > 1.0)) throw DomainError("beta-binomial prior needs u > 1");
    // pi(0) = G^u / (G^u + G); pi(s)/pi(s-1) = (G - s + 1) / (G^u + G - s).
    const double lgu = u_ * lg;
    log_mass_[0] = -std::log1p(std::exp(lg - lgu));
    for (int s = 1; s <= g_; ++s) {
      const double log_den = lgu + std::log1p((g_ - s) * std::exp(-lgu));
      log_mass_[s] = log_mass_[s - 1] + std::log(static_cast<double>(g_ - s + 1)) - log_den;
    }
  }
  const double z = log_sum_exp(log_mass_);
  for (double& v : log_mass_) v -= z;
}

SizePrior SizePrior::complexity(int num_groups, double c, double a) {
  return SizePrior(SizePriorKind::complexity, num_groups, c, a, 2.0);
}

SizePrior SizePrior::beta_binomial(int num_groups, double u) {
  return SizePrior(SizePriorKind::beta_binomial, num_groups, 1.0, 1.0, u);
}

double SizePrior::log_mass(int s) const {
  if (s < 0 || s > g_) throw DomainError("size prior: s out of range");
  return log_mass_[s];
}

std::string_view to_string(SizePriorKind k) {
  return k == SizePriorKind::complexity ? "complexity" : "beta_binomial";
}

std::string_view to_string(SlabKind k) {
  return k == SlabKind::group_gaussian ? "group_gaussian" : "group_laplace";
}

double Slab::log_normalizer(int m) const {
  if (kind == SlabKind::group_gaussian) return -0.5 * m * (kLog2Pi + std::log(sigma2));
  return m * std::log(lambda) + std::lgamma(0.5 * m) - std::log(2.0) - 0.5 * m * std::log(kPi) -
         std::lgamma(static_cast<double>(m));
}

double Slab::log_group_density(const Eigen::Ref<const Vector>& b) const {
  const int m = static_cast<int>(b.size());
  if (kind == SlabKind::group_gaussian) return log_normalizer(m) - 0.5 * b.squaredNorm() / sigma2;
  return log_normalizer(m) - lambda * b.norm();
}

void Slab::add_group_derivatives(const Eigen::Ref<const Vector>& b, Eigen::Ref<Vector> grad,
                                 Eigen::Ref<Matrix> hess) const {
  const auto m = b.size();
  if (kind == SlabKind::group_gaussian) {
    grad -= b / sigma2;
    hess.diagonal().array() -= 1.0 / sigma2;
    return;
  }
  const double nb = b.norm();
  if (nb == 0.0) return;
  grad -= lambda * b / nb;
  hess -= lambda * (Matrix::Identity(m, m) / nb - b * b.transpose() / (nb * nb * nb));
}

Vector Slab::sample_group(int m, Rng& rng) const {
  std::normal_distribution<double> nd;
  Vector v(m);
  for (int j = 0; j < m; ++j) v(j) = nd(rng);
  if (kind == SlabKind::group_gaussian) return std::sqrt(sigma2) * v;
  const double radius = std::gamma_distribution<double>(m, 1.0 / lambda)(rng);
  return radius * v / v.norm();
}

SasPrior::SasPrior(SizePrior size, Slab slab, std::vector<int> group_sizes)
    : size_(std::move(size)), slab_(slab), group_sizes_(std::move(group_sizes)) {
  if (static_cast<int>(group_sizes_.size()) != size_.num_groups())
    throw DomainError("size prior G does not match the number of groups");
  if (slab_.kind == SlabKind::group_gaussian && !(slab_.sigma2 > 0.0))
    throw DomainError("gaussian slab needs sigma2 > 0");
  if (slab_.kind == SlabKind::group_laplace && !(slab_.lambda > 0.0))
    throw DomainError("laplace slab needs lambda > 0");
}

int SasPrior::support_dim(const Support& s) const {
  int p = 0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] < 0 || s[k] >= num_groups() || (k > 0 && s[k] <= s[k - 1]))
      throw DomainError("invalid support " + format_support(s));
    p += group_sizes_[s[k]];
  }
  return p;
}

double SasPrior::log_slab_density(const Support& s, const Vector& beta_s) const {
  if (support_dim(s) != beta_s.size()) throw DomainError("slab block length does not match support");
  double total = 0.0;
  int off = 0;
  for (int g : s) {
    total += slab_.log_group_density(beta_s.segment(off, group_sizes_[g]));
    off += group_sizes_[g];
  }
  return total;
}

void SasPrior::slab_derivatives(const Support& s, const Vector& beta_s, Vector& grad, Matrix& hess) const {
  const int p = support_dim(s);
  if (p != beta_s.size()) throw DomainError("slab block length does not match support");
  grad = Vector::Zero(p);
  hess = Matrix::Zero(p, p);
  int off = 0;
  for (int g : s) {
    const int m = group_sizes_[g];
    slab_.add_group_derivatives(beta_s.segment(off, m), grad.segment(off, m), hess.block(off, off, m, m));
    off += m;
  }
}

Vector SasPrior::sample_slab(const Support& s, Rng& rng) const {
  Vector out(support_dim(s));
  int off = 0;
  for (int g : s) {
    out.segment(off, group_sizes_[g]) = slab_.sample_group(group_sizes_[g], rng);
    off += group_sizes_[g];
  }
  return out;
}

double SasPrior::log_support_mass(const Support& s) const {
  support_dim(s);
  const int k = static_cast<int>(s.size());
  return size_.log_mass(k) - log_choose(num_groups(), k);
}

double SasPrior::log_joint(const Support& s, const Vector& beta_s) const {
  return log_support_mass(s) + log_slab_density(s, beta_s);
}

Support sample_support(int num_groups, int size, Rng& rng) {
  std::vector<int> idx(num_groups);
  for (int g = 0; g < num_groups; ++g) idx[g] = g;
  for (int k = 0; k < size; ++k) {
    std::uniform_int_distribution<int> pick(k, num_groups - 1);
    std::swap(idx[k], idx[pick(rng)]);
  }
  Support s(idx.begin(), idx.begin() + size);
  std::sort(s.begin(), s.end());
  return s;
}

double slab_flatness(const SasPrior& prior, const PaddedVector& truth, const Matrix& metric,
                     double radius, int rays, std::uint64_t seed) {
  const auto p = truth.values.size();
  if (p == 0) return 0.0;
  const Matrix root = metric.size() == 0 ? Matrix::Identity(p, p) : sym_inv_sqrt(metric, "flatness metric");
  const double base = prior.log_slab_density(truth.support, truth.values);
  Rng rng = make_stream(seed, 0);
  std::normal_distribution<double> nd;
  double sup = 0.0;
  for (int r = 0; r < rays; ++r) {
    Vector e(p);
    for (Eigen::Index j = 0; j < e.size(); ++j) e(j) = nd(rng);
    const Vector u = root * (e / e.norm());
    // g(t) is concave with g(0) = 0: the max is interior, the min at t = radius.
    auto g = [&](double t) {
      return prior.log_slab_density(truth.support, truth.values + t * u) - base;
    };
    double lo = 0.0, hi = radius;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, radius); ++it) {
      const double a = hi - phi * (hi - lo);
      const double b = lo + phi * (hi - lo);
      if (g(a) < g(b)) lo = a;
      else hi = b;
    }
    sup = std::max({sup, g(0.5 * (lo + hi)), -g(radius)});
  }
  return sup;
}

PriorAudit audit_prior_constants(const SasPrior& prior, const GroupedDesign& design,
                                 const PaddedVector& truth, double eps_n, double r_n0,
                                 const PriorAuditOptions& opt) {
  design.validate_support(truth.support);
  const int s0 = static_cast<int>(truth.support.size());
  if (s0 < 1) throw DomainError("prior audit needs a nonempty true support");
  const int g = prior.num_groups();
  const double lg = std::log(static_cast<double>(g));

  PriorAudit out{};
  out.s0 = s0;
  out.seed = opt.seed;
  out.eps_n = eps_n;
  out.r_n0 = r_n0;
  out.log_support_mass_s0 = prior.log_support_mass(truth.support);
  out.a_pi = -out.log_support_mass_s0 / (s0 * lg);

  double a3 = -std::numeric_limits<double>::infinity();
  double a4 = std::numeric_limits<double>::infinity();
  const auto& lm = prior.size().log_masses();
  for (int s = 1; s <= g; ++s) {
    const double e = -(lm[s] - lm[s - 1]) / lg;
    a3 = std::max(a3, e);
    a4 = std::min(a4, e);
  }
  out.a3 = a3;
  out.a4 = a4;

  Rng rng = make_stream(opt.seed, 1);
  long hits = 0;
  for (int k = 0; k < opt.mc; ++k)
    if ((prior.sample_slab(truth.support, rng) - truth.values).norm() <= r_n0) ++hits;
  if (hits == 0) {
    out.small_ball = {3.0 / opt.mc, 0.0, true};
  } else {
    const double ph = static_cast<double>(hits) / opt.mc;
    out.small_ball = {ph, std::sqrt(ph * (1.0 - ph) / opt.mc), false};
  }

  out.flatness_radius = opt.flatness_radius;
  out.flatness_sup = slab_flatness(prior, truth, opt.metric, opt.flatness_radius, opt.flatness_rays, opt.seed);

  double a6 = -std::numeric_limits<double>::infinity();
  for (int m : prior.group_sizes()) a6 = std::max(a6, prior.slab().log_normalizer(m) / m);
  out.a6 = a6;
  return out;
}

SieveMass sieve_mass(const SasPrior& prior, const GroupedDesign& design, double c0, int s0, double l_n,
                     int mc, std::uint64_t seed) {
  if (mc < 1) throw DomainError("sieve_mass: mc must be positive");
  const int g = prior.num_groups();
  const int s_cap = std::min(g, static_cast<int>(std::floor(c0 * s0)));
  const auto& lm = prior.size().log_masses();
  std::vector<double> mass(lm.size());
  for (std::size_t s = 0; s < lm.size(); ++s) mass[s] = std::exp(lm[s]);
  std::discrete_distribution<int> size_dist(mass.begin(), mass.end());

  Rng rng = make_stream(seed, 0);
  long hits = 0;
  for (int k = 0; k < mc; ++k) {
    const int s = size_dist(rng);
    if (s == 0 || s > s_cap) continue;
    const Support sup = sample_support(g, s, rng);
    const Vector b = prior.sample_slab(sup, rng);
    if (design.predictor(sup, b).cwiseAbs().maxCoeff() > l_n) ++hits;
  }
  const double est = static_cast<double>(hits) / mc;
  const double se = std::sqrt(est * (1.0 - est) / mc);

  std::vector<int> sizes = prior.group_sizes();
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  double bound = 0.0;
  int p_max = 0;
  for (int s = 1; s <= s_cap; ++s) {
    p_max += sizes[s - 1];
    const double env = sparse_row_envelope(design, s);
    const double t = env > 0.0 ? l_n / env : std::numeric_limits<double>::infinity();
    double tail;
    if (!std::isfinite(t)) tail = 0.0;
    else if (prior.slab().kind == SlabKind::group_gaussian) tail = chi2_survival(p_max, t * t / prior.slab().sigma2);
    else tail = gamma_survival(p_max, prior.slab().lambda, t);
    bound += mass[s] * tail;
  }
  return {est, se, bound, est <= bound + 3.0 * se};
}

}  // namespace sbvm
