#include "pmslam/kernels.hpp"

namespace pmslam::kernels {
namespace {

void mode_gradients_scalar(const AxisTables& tab, const ModeIndices& modes, double norm,
                           double* gx, double* gy, double* gz) {
  for (std::size_t j = 0; j < modes.count; ++j) {
    const std::int32_t a = modes.n[0][j], b = modes.n[1][j], c = modes.n[2][j];
    const double sx = tab.sin_tab[0][a], sy = tab.sin_tab[1][b], sz = tab.sin_tab[2][c];
    gx[j] = norm * tab.dcos_tab[0][a] * sy * sz;
    gy[j] = norm * sx * tab.dcos_tab[1][b] * sz;
    gz[j] = norm * sx * sy * tab.dcos_tab[2][c];
  }
}

void accumulate_pct_scalar(const double* P, std::size_t n, std::size_t ld,
                           const double* const C[3], double* const W[3]) {
  for (std::size_t i = 0; i < n; ++i) W[0][i] = W[1][i] = W[2][i] = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double* col = P + j * ld;
    const double c0 = C[0][j], c1 = C[1][j], c2 = C[2][j];
    for (std::size_t i = 0; i < n; ++i) {
      W[0][i] += col[i] * c0;
      W[1][i] += col[i] * c1;
      W[2][i] += col[i] * c2;
    }
  }
}

void rank3_downdate_scalar(double* P, std::size_t n, std::size_t ld,
                           const double* const K[3], const double* const W[3]) {
  for (std::size_t j = 0; j < n; ++j) {
    double* col = P + j * ld;
    const double w0 = W[0][j], w1 = W[1][j], w2 = W[2][j];
    for (std::size_t i = 0; i < n; ++i) {
      col[i] -= K[0][i] * w0 + K[1][i] * w1 + K[2][i] * w2;
    }
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", mode_gradients_scalar, accumulate_pct_scalar,
                                 rank3_downdate_scalar};
  return table;
}

}  // namespace pmslam::kernels
