#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "sbvm/simd/kernels.hpp"

using namespace sbvm::simd;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  std::vector<double> v(n);
  for (auto& x : v) x = z(rng);
  return v;
}

double scale(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] * b[i]);
  return s;
}

}  // namespace

TEST_CASE("scalar kernels match naive loops") {
  std::mt19937_64 rng(1);
  const auto& k = scalar_kernels();
  const auto a = random_vec(37, rng), b = random_vec(37, rng), w = random_vec(37, rng);
  double dot = 0, wdot = 0, ss = 0;
  for (int i = 0; i < 37; ++i) {
    dot += a[i] * b[i];
    wdot += w[i] * a[i] * b[i];
    ss += a[i] * a[i];
  }
  CHECK(k.dot(a.data(), b.data(), 37) == doctest::Approx(dot).epsilon(1e-14));
  CHECK(k.weighted_dot(w.data(), a.data(), b.data(), 37) == doctest::Approx(wdot).epsilon(1e-14));
  CHECK(k.sum_squares(a.data(), 37) == doctest::Approx(ss).epsilon(1e-14));
  CHECK(k.dot(a.data(), b.data(), 0) == 0.0);
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  const KernelTable* v = avx2_kernels();
  if (v == nullptr || !cpu_supports_avx2()) {
    MESSAGE("AVX2 unavailable; equivalence not exercised");
    return;
  }
  const auto& s = scalar_kernels();
  std::mt19937_64 rng(2);
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 17u, 63u, 64u, 65u, 1000u, 4099u}) {
    const auto a = random_vec(n, rng), b = random_vec(n, rng), w = random_vec(n, rng);
    const double tol = 1e-14 * scale(a, b) * 4;
    CHECK(std::abs(v->dot(a.data(), b.data(), n) - s.dot(a.data(), b.data(), n)) <= tol);
    CHECK(std::abs(v->weighted_dot(w.data(), a.data(), b.data(), n) -
                   s.weighted_dot(w.data(), a.data(), b.data(), n)) <= 1e-14 * scale(a, b) * 16);
    CHECK(std::abs(v->sum_squares(a.data(), n) - s.sum_squares(a.data(), n)) <= tol);
    auto y1 = random_vec(n, rng);
    auto y2 = y1;
    s.axpy(0.7, a.data(), y1.data(), n);
    v->axpy(0.7, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-15));
  }
}

TEST_CASE("active table reports its isa") {
  const auto& t = active();
  CHECK((isa_name(t.isa) == "scalar" || isa_name(t.isa) == "avx2"));
}
