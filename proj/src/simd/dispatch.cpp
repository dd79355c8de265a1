#include <cstdlib>
#include <string>

#include "sbvm/simd/kernels.hpp"

namespace sbvm::simd {

bool cpu_supports_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const KernelTable& resolve() {
  const KernelTable* avx2 = avx2_kernels();
  const bool avx2_ok = avx2 != nullptr && cpu_supports_avx2();
  std::string request = "auto";
  if (const char* env = std::getenv("SPARSE_BVM_SIMD")) request = env;
  if (request == "scalar") return scalar_kernels();
  if (avx2_ok) return *avx2;
  return scalar_kernels();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = resolve();
  return table;
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace sbvm::simd
