#include "sbvm/design.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "sbvm/error.hpp"
#include "sbvm/parallel.hpp"
#include "sbvm/rng.hpp"
#include "sbvm/simd/kernels.hpp"

namespace sbvm {

GroupedDesign::GroupedDesign(Matrix x, std::vector<int> group_sizes)
    : x_(std::move(x)), sizes_(std::move(group_sizes)) {
  if (x_.rows() < 1) throw DomainError("design needs at least one row");
  if (sizes_.empty()) throw DomainError("design needs at least one group");
  int total = 0;
  offsets_.reserve(sizes_.size());
  for (int m : sizes_) {
    if (m < 1) throw DomainError("group sizes must be positive");
    offsets_.push_back(total);
    total += m;
  }
  if (total != x_.cols())
    throw DomainError("group sizes sum to " + std::to_string(total) + " but design has " +
                      std::to_string(x_.cols()) + " columns");
  if (!x_.allFinite()) throw DomainError("design has non-finite entries");
}

void GroupedDesign::validate_support(const Support& s) const {
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] < 0 || s[k] >= num_groups())
      throw DomainError("support group index " + std::to_string(s[k]) + " out of range");
    if (k > 0 && s[k] <= s[k - 1]) throw DomainError("support must be strictly increasing");
  }
}

int GroupedDesign::support_dim(const Support& s) const {
  int p = 0;
  for (int g : s) p += sizes_[g];
  return p;
}

std::vector<int> GroupedDesign::column_indices(const Support& s) const {
  std::vector<int> idx;
  idx.reserve(support_dim(s));
  for (int g : s)
    for (int j = 0; j < sizes_[g]; ++j) idx.push_back(offsets_[g] + j);
  return idx;
}

Matrix GroupedDesign::columns(const Support& s) const {
  const auto idx = column_indices(s);
  Matrix out(x_.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(j) = x_.col(idx[j]);
  return out;
}

Vector GroupedDesign::predictor(const Support& s, const Vector& beta_s) const {
  Vector eta = Vector::Zero(x_.rows());
  const auto idx = column_indices(s);
  if (static_cast<Eigen::Index>(idx.size()) != beta_s.size())
    throw DomainError("coefficient block length does not match support");
  const auto n = static_cast<std::size_t>(x_.rows());
  for (std::size_t j = 0; j < idx.size(); ++j)
    simd::axpy(beta_s(j), {x_.col(idx[j]).data(), n}, {eta.data(), n});
  return eta;
}

Vector embed(const GroupedDesign& d, const PaddedVector& v) {
  d.validate_support(v.support);
  if (d.support_dim(v.support) != v.values.size())
    throw DomainError("padded vector length does not match support dimension");
  Vector out = Vector::Zero(d.p());
  const auto idx = d.column_indices(v.support);
  for (std::size_t j = 0; j < idx.size(); ++j) out(idx[j]) = v.values(j);
  return out;
}

PaddedVector restrict_to(const GroupedDesign& d, const Vector& beta, const Support& s) {
  d.validate_support(s);
  if (beta.size() != d.p()) throw DomainError("ambient vector length does not match design");
  const auto idx = d.column_indices(s);
  PaddedVector out{s, Vector(static_cast<Eigen::Index>(idx.size()))};
  for (std::size_t j = 0; j < idx.size(); ++j) out.values(j) = beta(idx[j]);
  return out;
}

Support active_groups(const GroupedDesign& d, const Vector& beta) {
  Support s;
  for (int g = 0; g < d.num_groups(); ++g)
    if (beta.segment(d.group_offset(g), d.group_size(g)).cwiseAbs().maxCoeff() != 0.0) s.push_back(g);
  return s;
}

bool is_subset(const Support& a, const Support& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

std::string format_support(const Support& s) {
  std::string out = "{";
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (k) out += ",";
    out += std::to_string(s[k]);
  }
  return out + "}";
}

namespace {

double count_supports(int g, int s_max) {
  double total = 0.0;
  for (int k = 0; k <= std::min(s_max, g); ++k) total += std::exp(log_choose(g, k));
  return total;
}

void check_budget(double count, std::size_t cap) {
  if (count > static_cast<double>(cap) + 0.5)
    throw BudgetExceeded("support enumeration needs " + std::to_string(static_cast<long long>(count)) +
                         " supports, cap is " + std::to_string(cap));
}

void lex_visit(int num_groups, int s_max, Support& cur, std::vector<Support>& out) {
  out.push_back(cur);
  if (static_cast<int>(cur.size()) == s_max) return;
  const int start = cur.empty() ? 0 : cur.back() + 1;
  for (int g = start; g < num_groups; ++g) {
    cur.push_back(g);
    lex_visit(num_groups, s_max, cur, out);
    cur.pop_back();
  }
}

}  // namespace

std::vector<Support> enumerate_supports(int num_groups, int s_max, std::size_t cap) {
  if (num_groups < 0 || s_max < 0) throw DomainError("enumerate_supports: negative size");
  s_max = std::min(s_max, num_groups);
  check_budget(count_supports(num_groups, s_max), cap);
  std::vector<Support> out;
  Support cur;
  lex_visit(num_groups, s_max, cur, out);
  return out;
}

std::vector<Support> enumerate_supports_exact(int num_groups, int s, std::size_t cap) {
  if (s < 0 || s > num_groups) throw DomainError("enumerate_supports_exact: size out of range");
  check_budget(std::exp(log_choose(num_groups, s)), cap);
  std::vector<Support> out;
  Support cur(s);
  for (int k = 0; k < s; ++k) cur[k] = k;
  while (true) {
    out.push_back(cur);
    int k = s - 1;
    while (k >= 0 && cur[k] == num_groups - s + k) --k;
    if (k < 0) break;
    ++cur[k];
    for (int j = k + 1; j < s; ++j) cur[j] = cur[j - 1] + 1;
  }
  return out;
}

Matrix weighted_gram(const GroupedDesign& d, const Vector& w) {
  if (w.size() != d.n()) throw DomainError("weight vector length does not match design rows");
  return weighted_crossprod(d.x(), w);
}

Matrix weighted_crossprod(const Matrix& xs, const Vector& w) {
  const auto n = static_cast<std::size_t>(xs.rows());
  const auto k = xs.cols();
  Matrix f(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b <= a; ++b) {
      f(a, b) = simd::weighted_dot({w.data(), n}, {xs.col(a).data(), n}, {xs.col(b).data(), n});
      f(b, a) = f(a, b);
    }
  }
  return f;
}

Vector crossprod(const Matrix& xs, const Vector& v) {
  const auto n = static_cast<std::size_t>(xs.rows());
  Vector out(xs.cols());
  for (Eigen::Index a = 0; a < xs.cols(); ++a) out(a) = simd::dot({xs.col(a).data(), n}, {v.data(), n});
  return out;
}

Matrix principal_block(const Matrix& full, const std::vector<int>& idx) {
  const auto k = static_cast<Eigen::Index>(idx.size());
  Matrix out(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) out(a, b) = full(idx[a], idx[b]);
  return out;
}

double sparse_row_envelope(const GroupedDesign& d, int s) {
  if (s < 1 || s > d.num_groups()) throw DomainError("sparse_row_envelope: s out of range");
  const Matrix& x = d.x();
  double best = 0.0;
  std::vector<double> block(d.num_groups());
  for (int i = 0; i < d.n(); ++i) {
    for (int g = 0; g < d.num_groups(); ++g)
      block[g] = x.row(i).segment(d.group_offset(g), d.group_size(g)).squaredNorm();
    std::partial_sort(block.begin(), block.begin() + s, block.end(), std::greater<>());
    double sum = 0.0;
    for (int k = 0; k < s; ++k) sum += block[k];
    best = std::max(best, sum);
  }
  return std::sqrt(best);
}

namespace {

// Evaluates `fn` on every support of size min(s, G) in parallel and returns
// the per-support results in lexicographic order.
template <class T, class Fn>
std::vector<T> per_support(const GroupedDesign& d, int s, std::size_t cap, Fn fn) {
  if (s < 1) throw DomainError("sparsity level must be at least 1");
  const auto supports = enumerate_supports_exact(d.num_groups(), std::min(s, d.num_groups()), cap);
  std::vector<T> out(supports.size());
  parallel_for(supports.size(), [&](std::size_t k) { out[k] = fn(supports[k]); });
  return out;
}

Eigen::SelfAdjointEigenSolver<Matrix> eigen_of(const Matrix& f) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(f, Eigen::EigenvaluesOnly);
}

}  // namespace

double compatibility_phi2(const GroupedDesign& d, const Vector& w, int s, std::size_t cap) {
  const Matrix f = weighted_gram(d, w) / static_cast<double>(d.n());
  const auto vals = per_support<double>(d, s, cap, [&](const Support& t) {
    return eigen_of(principal_block(f, d.column_indices(t))).eigenvalues()(0);
  });
  const double lmin = *std::min_element(vals.begin(), vals.end());
  return std::sqrt(std::max(0.0, lmin));
}

GramExtremes sparse_gram_extremes(const GroupedDesign& d, const Vector& w, int s, std::size_t cap) {
  const Matrix f = weighted_gram(d, w) / static_cast<double>(d.n());
  const auto vals = per_support<std::pair<double, double>>(d, s, cap, [&](const Support& t) {
    const auto es = eigen_of(principal_block(f, d.column_indices(t)));
    return std::make_pair(es.eigenvalues()(0), es.eigenvalues()(es.eigenvalues().size() - 1));
  });
  GramExtremes out{std::numeric_limits<double>::infinity(), 0.0};
  for (const auto& [lo, hi] : vals) {
    out.c_f = std::min(out.c_f, lo);
    out.C_f = std::max(out.C_f, hi);
  }
  return out;
}

InfluenceLeverage sparse_influence_leverage(const GroupedDesign& d, const Vector& w, int s,
                                            std::size_t cap) {
  const Matrix f = weighted_gram(d, w);
  const Matrix& x = d.x();
  const auto vals = per_support<std::pair<double, double>>(d, s, cap, [&](const Support& t) {
    const auto idx = d.column_indices(t);
    const Matrix ft = principal_block(f, idx);
    Eigen::LLT<Matrix> llt(ft);
    if (llt.info() != Eigen::Success || !is_positive_definite(ft))
      throw SingularMatrix("Fisher block singular on support " + format_support(t));
    double q2 = 0.0, l = 0.0;
    Vector row(static_cast<Eigen::Index>(idx.size()));
    for (int i = 0; i < d.n(); ++i) {
      for (std::size_t j = 0; j < idx.size(); ++j) row(j) = x(i, idx[j]);
      // ||F^{-1/2} x||^2 = x^T F^{-1} x for the symmetric root.
      const double lev = row.dot(llt.solve(row));
      q2 = std::max(q2, lev);
      l = std::max(l, w(i) * lev);
    }
    return std::make_pair(q2, l);
  });
  double q2 = 0.0, l = 0.0;
  for (const auto& [a, b] : vals) {
    q2 = std::max(q2, a);
    l = std::max(l, b);
  }
  return {std::sqrt(q2), l, q2 > 0.0 ? l / q2 : 0.0};
}

namespace {

struct GroupLayout {
  std::vector<int> offsets;
  std::vector<int> sizes;
};

double group_l21(const Vector& v, const GroupLayout& gl) {
  double s = 0.0;
  for (std::size_t g = 0; g < gl.sizes.size(); ++g) s += v.segment(gl.offsets[g], gl.sizes[g]).norm();
  return s;
}

// Minimizes v^T A v / ||v||_{2,1}^2 by projected gradient on the l_{2,1}
// sphere from one start.
double phi1_descent(const Matrix& a, const GroupLayout& gl, Vector v, double step, const Phi1Options& opt) {
  v /= group_l21(v, gl);
  double val = v.dot(a * v);
  for (int it = 0; it < opt.max_iter; ++it) {
    Vector grad = a * v;
    for (std::size_t g = 0; g < gl.sizes.size(); ++g) {
      auto blk = v.segment(gl.offsets[g], gl.sizes[g]);
      const double nb = blk.norm();
      if (nb > 0.0) grad.segment(gl.offsets[g], gl.sizes[g]) -= val * blk / nb;
    }
    Vector next = v - step * grad;
    const double nn = group_l21(next, gl);
    if (!(nn > 0.0)) break;
    next /= nn;
    const double nv = next.dot(a * next);
    if (nv > val) break;
    const bool done = val - nv <= opt.tol * std::max(1.0, val);
    v = std::move(next);
    val = nv;
    if (done) break;
  }
  return val;
}

}  // namespace

Phi1Result compatibility_phi1(const GroupedDesign& d, const Vector& w, int s, const Phi1Options& opt,
                              std::size_t cap) {
  const Matrix f = weighted_gram(d, w) / static_cast<double>(d.n());
  const int se = std::min(s, d.num_groups());
  if (se == 1) {
    const double phi2 = compatibility_phi2(d, w, 1, cap);
    return {phi2, phi2, false};
  }
  const auto supports = enumerate_supports_exact(d.num_groups(), se, cap);
  std::vector<std::pair<double, double>> vals(supports.size());
  parallel_for(supports.size(), [&](std::size_t k) {
    const Support& t = supports[k];
    const Matrix a = principal_block(f, d.column_indices(t));
    GroupLayout gl;
    int off = 0;
    for (int g : t) {
      gl.offsets.push_back(off);
      gl.sizes.push_back(d.group_size(g));
      off += d.group_size(g);
    }
    const double lmax = eigen_of(a).eigenvalues().maxCoeff();
    const double step = lmax > 0.0 ? 1.0 / lmax : 1.0;
    Rng rng = make_stream(opt.seed, k);
    std::normal_distribution<double> nd;
    double best = std::numeric_limits<double>::infinity();
    // Block-sparse starts from each group's smallest eigenvector.
    for (std::size_t g = 0; g < gl.sizes.size(); ++g) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(a.block(gl.offsets[g], gl.offsets[g], gl.sizes[g], gl.sizes[g]));
      Vector v = Vector::Zero(a.rows());
      v.segment(gl.offsets[g], gl.sizes[g]) = es.eigenvectors().col(0);
      best = std::min(best, phi1_descent(a, gl, v, step, opt));
    }
    for (int r = 0; r < opt.restarts; ++r) {
      Vector v(a.rows());
      for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = nd(rng);
      best = std::min(best, phi1_descent(a, gl, v, step, opt));
    }
    double sampled = std::numeric_limits<double>::infinity();
    for (int r = 0; r < opt.samples; ++r) {
      Vector v(a.rows());
      for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = nd(rng);
      const double n1 = group_l21(v, gl);
      sampled = std::min(sampled, v.dot(a * v) / (n1 * n1));
    }
    vals[k] = {best, sampled};
  });
  double best = std::numeric_limits<double>::infinity(), sampled = best;
  for (const auto& [b, sm] : vals) {
    best = std::min(best, b);
    sampled = std::min(sampled, sm);
  }
  return {std::sqrt(std::max(0.0, se * best)), std::sqrt(std::max(0.0, se * sampled)), true};
}

GroupedDesign read_design_csv(std::istream& in) {
  std::string line;
  std::vector<int> sizes;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const std::string key = "group_sizes:";
    if (line.rfind(key, 0) != 0) throw ConfigError("design CSV must start with 'group_sizes:' header");
    std::stringstream ss(line.substr(key.size()));
    std::string tok;
    while (std::getline(ss, tok, ',')) sizes.push_back(std::stoi(tok));
    break;
  }
  if (sizes.empty()) throw ConfigError("design CSV has no group_sizes header");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<double> row;
    while (std::getline(ss, tok, ',')) row.push_back(std::stod(tok));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("design CSV has no rows");
  Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw ConfigError("design CSV rows have unequal length");
    for (std::size_t j = 0; j < rows[i].size(); ++j) x(i, j) = rows[i][j];
  }
  return GroupedDesign(std::move(x), std::move(sizes));
}

GroupedDesign load_design_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open design file " + path);
  return read_design_csv(in);
}

void write_design_csv(std::ostream& out, const GroupedDesign& d, const std::string& comment) {
  if (!comment.empty()) out << "# " << comment << "\n";
  out << "group_sizes: ";
  for (int g = 0; g < d.num_groups(); ++g) out << (g ? "," : "") << d.group_size(g);
  out << "\n" << std::setprecision(17);
  for (int i = 0; i < d.n(); ++i) {
    for (int j = 0; j < d.p(); ++j) out << (j ? "," : "") << d.x()(i, j);
    out << "\n";
  }
}

}  // namespace sbvm
