#pragma once

// Data-parallel inner loops over observations. Every kernel has a scalar
// reference implementation and, on x86-64, an AVX2/FMA variant. The variant is
// chosen once at first use from the CPU features; the environment variable
// SPARSE_BVM_SIMD=scalar|avx2|auto overrides the choice.

#include <cstddef>
#include <span>
#include <string_view>

namespace sbvm::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  // sum_i a_i b_i
  double (*dot)(const double* a, const double* b, std::size_t n);
  // sum_i w_i a_i b_i
  double (*weighted_dot)(const double* w, const double* a, const double* b, std::size_t n);
  // y_i += alpha x_i
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // sum_i a_i^2
  double (*sum_squares)(const double* a, std::size_t n);
};

const KernelTable& scalar_kernels();
// Null when the AVX2 translation unit was not built.
const KernelTable* avx2_kernels();
bool cpu_supports_avx2();

// Active table (resolved once, thread-safe).
const KernelTable& active();
std::string_view isa_name(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline double weighted_dot(std::span<const double> w, std::span<const double> a,
                           std::span<const double> b) {
  return active().weighted_dot(w.data(), a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline double sum_squares(std::span<const double> a) {
  return active().sum_squares(a.data(), a.size());
}

}  // namespace sbvm::simd
