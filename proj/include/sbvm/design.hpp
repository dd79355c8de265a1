#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sbvm/numeric.hpp"

namespace sbvm {

// Group indices, 0-based and strictly increasing.
using Support = std::vector<int>;

inline constexpr std::size_t kDefaultEnumerationCap = 2'000'000;

class GroupedDesign {
 public:
  GroupedDesign() = default;
  GroupedDesign(Matrix x, std::vector<int> group_sizes);

  const Matrix& x() const { return x_; }
  int n() const { return static_cast<int>(x_.rows()); }
  int p() const { return static_cast<int>(x_.cols()); }
  int num_groups() const { return static_cast<int>(sizes_.size()); }
  const std::vector<int>& group_sizes() const { return sizes_; }
  int group_size(int g) const { return sizes_[g]; }
  int group_offset(int g) const { return offsets_[g]; }

  void validate_support(const Support& s) const;
  int support_dim(const Support& s) const;
  std::vector<int> column_indices(const Support& s) const;
  Matrix columns(const Support& s) const;
  // X_S beta_S.
  Vector predictor(const Support& s, const Vector& beta_s) const;

 private:
  Matrix x_;
  std::vector<int> sizes_;
  std::vector<int> offsets_;
};

struct PaddedVector {
  Support support;
  Vector values;
};

Vector embed(const GroupedDesign& d, const PaddedVector& v);
PaddedVector restrict_to(const GroupedDesign& d, const Vector& beta, const Support& s);
// Groups whose block of `beta` is not identically zero.
Support active_groups(const GroupedDesign& d, const Vector& beta);
bool is_subset(const Support& a, const Support& b);

std::string format_support(const Support& s);

// All supports with |S| <= s_max in lexicographic order (empty first).
// Throws BudgetExceeded when the count exceeds `cap`.
std::vector<Support> enumerate_supports(int num_groups, int s_max,
                                        std::size_t cap = kDefaultEnumerationCap);
// Supports of cardinality exactly s, lexicographic.
std::vector<Support> enumerate_supports_exact(int num_groups, int s,
                                              std::size_t cap = kDefaultEnumerationCap);

// X^T diag(w) X.
Matrix weighted_gram(const GroupedDesign& d, const Vector& w);
Matrix principal_block(const Matrix& full, const std::vector<int>& idx);
// xs^T diag(w) xs and xs^T v for a column-major block of columns.
Matrix weighted_crossprod(const Matrix& xs, const Vector& w);
Vector crossprod(const Matrix& xs, const Vector& v);

double sparse_row_envelope(const GroupedDesign& d, int s);

// Enumerated constants. Extremes over |T| <= s are attained at |T| = min(s, G)
// by eigenvalue interlacing, so only those supports are visited.
double compatibility_phi2(const GroupedDesign& d, const Vector& w, int s,
                          std::size_t cap = kDefaultEnumerationCap);

struct Phi1Result {
  double value;
  // Largest ratio seen at a random sparse direction: an upper bound on the
  // true infimum, reported as a cross-check.
  double sampled_upper;
  bool heuristic;
};
struct Phi1Options {
  int restarts = 64;
  double tol = 1e-10;
  int max_iter = 20000;
  std::uint64_t seed = 0x5eed;
  int samples = 2000;
};
Phi1Result compatibility_phi1(const GroupedDesign& d, const Vector& w, int s,
                              const Phi1Options& opt = {},
                              std::size_t cap = kDefaultEnumerationCap);

struct InfluenceLeverage {
  double q_star;
  double l_star;
  double ratio;  // l_star / q_star^2
};
InfluenceLeverage sparse_influence_leverage(const GroupedDesign& d, const Vector& w, int s,
                                            std::size_t cap = kDefaultEnumerationCap);

struct GramExtremes {
  double c_f;
  double C_f;
};
GramExtremes sparse_gram_extremes(const GroupedDesign& d, const Vector& w, int s,
                                  std::size_t cap = kDefaultEnumerationCap);

// CSV with a header line `group_sizes: m1,m2,...` followed by n rows of p
// values. Leading lines starting with '#' are skipped on read.
GroupedDesign read_design_csv(std::istream& in);
GroupedDesign load_design_csv(const std::string& path);
void write_design_csv(std::ostream& out, const GroupedDesign& d, const std::string& comment = {});

}  // namespace sbvm
