#pragma once

// Inner loops of the reduced-rank magnetic-map update. Each kernel has a
// scalar reference implementation and an AVX2/FMA variant; the variant is
// chosen once at startup from CPUID (override with PMSLAM_KERNELS=scalar or
// PMSLAM_KERNELS=avx2).
//
// Matrices are column-major with leading dimension `ld`; 3-column operands
// are passed as three separate arrays (structure of arrays).

#include <cstdint>
#include <span>
#include <string_view>

namespace pmslam::kernels {

/// Per-axis tables for one evaluation point. For axis i and mode number n,
/// sin_tab[i][n] = sin(k_i n u_i) and dcos_tab[i][n] = k_i n cos(k_i n u_i),
/// where u_i is the coordinate shifted to the domain corner. Entry 0 is unused.
struct AxisTables {
  const double* sin_tab[3];
  const double* dcos_tab[3];
};

struct ModeIndices {
  const std::int32_t* n[3];
  std::size_t count;
};

/// g[0][j], g[1][j], g[2][j]: gradient of mode j (scaled by `norm`).
using ModeGradientsFn = void (*)(const AxisTables& tab, const ModeIndices& modes,
                                 double norm, double* gx, double* gy, double* gz);

/// W_a[i] = sum_j P(i, j) C_a[j] for a = 0..2, i, j < n.
using AccumulatePctFn = void (*)(const double* P, std::size_t n, std::size_t ld,
                                 const double* const C[3], double* const W[3]);

/// P(i, j) -= sum_a K_a[i] W_a[j] for i, j < n.
using Rank3DowndateFn = void (*)(double* P, std::size_t n, std::size_t ld,
                                 const double* const K[3], const double* const W[3]);

struct KernelTable {
  std::string_view name;
  ModeGradientsFn mode_gradients;
  AccumulatePctFn accumulate_pct;
  Rank3DowndateFn rank3_downdate;
};

const KernelTable& scalar_kernels();

/// Null when the binary was built without AVX2 support.
const KernelTable* avx2_kernels();

bool cpu_has_avx2();

/// The table used by the library, resolved once.
const KernelTable& active_kernels();

}  // namespace pmslam::kernels
