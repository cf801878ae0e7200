#include "pmslam/kernels.hpp"

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "pmslam/magmap.hpp"

using namespace pmslam;
using namespace pmslam::kernels;

namespace {

std::vector<double> randn(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

const KernelTable* avx2_or_skip() {
  if (!cpu_has_avx2() || avx2_kernels() == nullptr) return nullptr;
  return avx2_kernels();
}

// Sizes around the 4-wide vector boundary and the real state dimension.
const std::size_t kSizes[] = {1, 2, 3, 4, 5, 7, 8, 13, 64, 259};

}  // namespace

TEST(Kernels, ActiveTableIsKnown) {
  const auto& k = active_kernels();
  EXPECT_TRUE(k.name == "scalar" || k.name == "avx2");
  EXPECT_EQ(scalar_kernels().name, "scalar");
}

TEST(Kernels, ModeGradientsEquivalent) {
  const KernelTable* v = avx2_or_skip();
  if (!v) GTEST_SKIP() << "no AVX2";
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::int32_t> mode(1, 12);
  for (std::size_t n : kSizes) {
    std::array<std::vector<double>, 3> s, c;
    AxisTables tab{};
    for (int a = 0; a < 3; ++a) {
      s[a] = randn(13, rng);
      c[a] = randn(13, rng);
      tab.sin_tab[a] = s[a].data();
      tab.dcos_tab[a] = c[a].data();
    }
    std::array<std::vector<std::int32_t>, 3> idx;
    for (auto& v3 : idx) {
      v3.resize(n);
      for (auto& x : v3) x = mode(rng);
    }
    const ModeIndices mi{{idx[0].data(), idx[1].data(), idx[2].data()}, n};
    std::vector<double> r(3 * n), q(3 * n);
    scalar_kernels().mode_gradients(tab, mi, 0.7, r.data(), r.data() + n, r.data() + 2 * n);
    v->mode_gradients(tab, mi, 0.7, q.data(), q.data() + n, q.data() + 2 * n);
    for (std::size_t i = 0; i < 3 * n; ++i) EXPECT_NEAR(r[i], q[i], 1e-14 * (1 + std::abs(r[i])));
  }
}

TEST(Kernels, AccumulatePctEquivalent) {
  const KernelTable* v = avx2_or_skip();
  if (!v) GTEST_SKIP() << "no AVX2";
  std::mt19937_64 rng(2);
  for (std::size_t n : kSizes) {
    const std::size_t ld = n + 3;
    const auto P = randn(ld * n, rng);
    std::array<std::vector<double>, 3> C;
    for (auto& c : C) c = randn(n, rng);
    const double* Cp[3] = {C[0].data(), C[1].data(), C[2].data()};
    std::vector<double> r(3 * n, 9.0), q(3 * n, -9.0);
    double* Wr[3] = {r.data(), r.data() + n, r.data() + 2 * n};
    double* Wq[3] = {q.data(), q.data() + n, q.data() + 2 * n};
    scalar_kernels().accumulate_pct(P.data(), n, ld, Cp, Wr);
    v->accumulate_pct(P.data(), n, ld, Cp, Wq);
    for (std::size_t i = 0; i < 3 * n; ++i) EXPECT_NEAR(r[i], q[i], 1e-12 * std::sqrt(double(n)));
    // Scalar reference against a plain triple loop.
    for (int a = 0; a < 3; ++a)
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += P[j * ld + i] * C[a][j];
        EXPECT_NEAR(Wr[a][i], acc, 1e-12 * std::sqrt(double(n)));
      }
  }
}

TEST(Kernels, Rank3DowndateEquivalent) {
  const KernelTable* v = avx2_or_skip();
  if (!v) GTEST_SKIP() << "no AVX2";
  std::mt19937_64 rng(3);
  for (std::size_t n : kSizes) {
    const std::size_t ld = n + 1;
    auto Pr = randn(ld * n, rng);
    auto Pq = Pr;
    const auto orig = Pr;
    std::array<std::vector<double>, 3> K, W;
    for (auto& k : K) k = randn(n, rng);
    for (auto& w : W) w = randn(n, rng);
    const double* Kp[3] = {K[0].data(), K[1].data(), K[2].data()};
    const double* Wp[3] = {W[0].data(), W[1].data(), W[2].data()};
    scalar_kernels().rank3_downdate(Pr.data(), n, ld, Kp, Wp);
    v->rank3_downdate(Pq.data(), n, ld, Kp, Wp);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        const double expect =
            orig[j * ld + i] - K[0][i] * W[0][j] - K[1][i] * W[1][j] - K[2][i] * W[2][j];
        EXPECT_NEAR(Pr[j * ld + i], expect, 1e-13);
        EXPECT_NEAR(Pq[j * ld + i], expect, 1e-13);
      }
      // Padding rows are untouched.
      EXPECT_EQ(Pq[j * ld + n], orig[j * ld + n]);
    }
  }
}

TEST(Kernels, MapUpdateAgreesWithDenseAlgebra) {
  // Runs through whichever table is active; the dense Eigen update is the oracle.
  MagHyperparams hp;
  hp.num_basis = 64;
  const HexGridSpec grid{5.0, 2.0, Vec3::Zero()};
  MagTile t = build_basis({0, 0, 0}, hp, grid);
  const Pose pose{Vec3(0.3, -0.8, 0.2), exp_map(Vec3(0.2, -0.1, 1.0))};
  const Vec3 z(0.1, 0.4, -0.6);
  const Eigen::MatrixXd C = to_rotation(pose.q).transpose() * basis_gradients(pose.p, t);
  const Eigen::MatrixXd S = C * t.cov * C.transpose() + hp.noise;
  const Eigen::MatrixXd K = t.cov * C.transpose() * S.inverse();
  const Eigen::VectorXd mean = t.mean + K * (z - C * t.mean);
  const Eigen::MatrixXd cov = t.cov - K * S * K.transpose();
  kalman_update_inplace(t, make_innovation(t, pose, hp), z);
  EXPECT_LT((t.mean - mean).norm(), 1e-12);
  EXPECT_LT((t.cov - cov).norm(), 1e-12);
}
