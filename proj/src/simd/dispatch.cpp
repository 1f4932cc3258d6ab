#include <cstdlib>
#include <string_view>

#include "flex/simd/kernels.hpp"

namespace flex::simd {

const KernelTable& kernels() {
  static const KernelTable& active = []() -> const KernelTable& {
    const char* env = std::getenv("FLEX_SIMD");
    if (env != nullptr && std::string_view(env) == "scalar") return scalar_kernels();
    if (const KernelTable* t = avx2_kernels()) return *t;
    return scalar_kernels();
  }();
  return active;
}

}  // namespace flex::simd
