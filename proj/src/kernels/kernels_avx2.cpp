// Built with -mavx2 -mfma; only reached through avx2_kernels() after a
// CPUID check.

#include "pmslam/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace pmslam::kernels {
namespace {

void mode_gradients_avx2(const AxisTables& tab, const ModeIndices& modes, double norm,
                         double* gx, double* gy, double* gz) {
  const __m256d vnorm = _mm256_set1_pd(norm);
  std::size_t j = 0;
  for (; j + 4 <= modes.count; j += 4) {
    const __m128i ia = _mm_loadu_si128(reinterpret_cast<const __m128i*>(modes.n[0] + j));
    const __m128i ib = _mm_loadu_si128(reinterpret_cast<const __m128i*>(modes.n[1] + j));
    const __m128i ic = _mm_loadu_si128(reinterpret_cast<const __m128i*>(modes.n[2] + j));
    const __m256d sx = _mm256_i32gather_pd(tab.sin_tab[0], ia, 8);
    const __m256d sy = _mm256_i32gather_pd(tab.sin_tab[1], ib, 8);
    const __m256d sz = _mm256_i32gather_pd(tab.sin_tab[2], ic, 8);
    const __m256d dx = _mm256_i32gather_pd(tab.dcos_tab[0], ia, 8);
    const __m256d dy = _mm256_i32gather_pd(tab.dcos_tab[1], ib, 8);
    const __m256d dz = _mm256_i32gather_pd(tab.dcos_tab[2], ic, 8);
    _mm256_storeu_pd(gx + j, _mm256_mul_pd(_mm256_mul_pd(vnorm, dx), _mm256_mul_pd(sy, sz)));
    _mm256_storeu_pd(gy + j, _mm256_mul_pd(_mm256_mul_pd(vnorm, sx), _mm256_mul_pd(dy, sz)));
    _mm256_storeu_pd(gz + j, _mm256_mul_pd(_mm256_mul_pd(vnorm, sx), _mm256_mul_pd(sy, dz)));
  }
  for (; j < modes.count; ++j) {
    const std::int32_t a = modes.n[0][j], b = modes.n[1][j], c = modes.n[2][j];
    const double sx = tab.sin_tab[0][a], sy = tab.sin_tab[1][b], sz = tab.sin_tab[2][c];
    gx[j] = norm * tab.dcos_tab[0][a] * (sy * sz);
    gy[j] = norm * sx * (tab.dcos_tab[1][b] * sz);
    gz[j] = norm * sx * (sy * tab.dcos_tab[2][c]);
  }
}

void accumulate_pct_avx2(const double* P, std::size_t n, std::size_t ld,
                         const double* const C[3], double* const W[3]) {
  for (std::size_t i = 0; i < n; ++i) W[0][i] = W[1][i] = W[2][i] = 0.0;
  const std::size_t n4 = n & ~std::size_t{3};
  // Two columns per pass halves the loads/stores of the accumulators.
  std::size_t j = 0;
  for (; j + 2 <= n; j += 2) {
    const double* col0 = P + j * ld;
    const double* col1 = col0 + ld;
    const __m256d a0 = _mm256_set1_pd(C[0][j]), a1 = _mm256_set1_pd(C[0][j + 1]);
    const __m256d b0 = _mm256_set1_pd(C[1][j]), b1 = _mm256_set1_pd(C[1][j + 1]);
    const __m256d c0 = _mm256_set1_pd(C[2][j]), c1 = _mm256_set1_pd(C[2][j + 1]);
    std::size_t i = 0;
    for (; i < n4; i += 4) {
      const __m256d p0 = _mm256_loadu_pd(col0 + i);
      const __m256d p1 = _mm256_loadu_pd(col1 + i);
      __m256d w0 = _mm256_loadu_pd(W[0] + i);
      __m256d w1 = _mm256_loadu_pd(W[1] + i);
      __m256d w2 = _mm256_loadu_pd(W[2] + i);
      w0 = _mm256_fmadd_pd(p1, a1, _mm256_fmadd_pd(p0, a0, w0));
      w1 = _mm256_fmadd_pd(p1, b1, _mm256_fmadd_pd(p0, b0, w1));
      w2 = _mm256_fmadd_pd(p1, c1, _mm256_fmadd_pd(p0, c0, w2));
      _mm256_storeu_pd(W[0] + i, w0);
      _mm256_storeu_pd(W[1] + i, w1);
      _mm256_storeu_pd(W[2] + i, w2);
    }
    for (; i < n; ++i) {
      W[0][i] += col0[i] * C[0][j] + col1[i] * C[0][j + 1];
      W[1][i] += col0[i] * C[1][j] + col1[i] * C[1][j + 1];
      W[2][i] += col0[i] * C[2][j] + col1[i] * C[2][j + 1];
    }
  }
  for (; j < n; ++j) {
    const double* col = P + j * ld;
    for (std::size_t i = 0; i < n; ++i) {
      W[0][i] += col[i] * C[0][j];
      W[1][i] += col[i] * C[1][j];
      W[2][i] += col[i] * C[2][j];
    }
  }
}

void rank3_downdate_avx2(double* P, std::size_t n, std::size_t ld,
                         const double* const K[3], const double* const W[3]) {
  const std::size_t n4 = n & ~std::size_t{3};
  for (std::size_t j = 0; j < n; ++j) {
    double* col = P + j * ld;
    const double w0 = W[0][j], w1 = W[1][j], w2 = W[2][j];
    const __m256d v0 = _mm256_set1_pd(w0), v1 = _mm256_set1_pd(w1), v2 = _mm256_set1_pd(w2);
    std::size_t i = 0;
    for (; i < n4; i += 4) {
      __m256d acc = _mm256_mul_pd(_mm256_loadu_pd(K[0] + i), v0);
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(K[1] + i), v1, acc);
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(K[2] + i), v2, acc);
      _mm256_storeu_pd(col + i, _mm256_sub_pd(_mm256_loadu_pd(col + i), acc));
    }
    for (; i < n; ++i) col[i] -= K[0][i] * w0 + K[1][i] * w1 + K[2][i] * w2;
  }
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const KernelTable table{"avx2", mode_gradients_avx2, accumulate_pct_avx2,
                                 rank3_downdate_avx2};
  return &table;
}

}  // namespace pmslam::kernels

#else

namespace pmslam::kernels {
const KernelTable* avx2_kernels() { return nullptr; }
}  // namespace pmslam::kernels

#endif
