#include <cstdlib>
#include <string_view>

#include "pmslam/kernels.hpp"

namespace pmslam::kernels {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& active_kernels() {
  static const KernelTable& table = []() -> const KernelTable& {
    const char* env = std::getenv("PMSLAM_KERNELS");
    const std::string_view want = env ? env : "auto";
    if (want == "scalar") return scalar_kernels();
    const KernelTable* simd = avx2_kernels();
    if (simd && cpu_has_avx2()) return *simd;
    return scalar_kernels();
  }();
  return table;
}

}  // namespace pmslam::kernels
