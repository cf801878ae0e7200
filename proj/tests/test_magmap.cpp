#include "pmslam/magmap.hpp"

#include <cmath>
#include <random>
#include <set>

#include <Eigen/Dense>
#include <gtest/gtest.h>

using namespace pmslam;

namespace {

const HexGridSpec kGrid{5.0, 2.0, Vec3::Zero()};

MagHyperparams small_hp(int m = 64) {
  MagHyperparams hp;
  hp.num_basis = m;
  return hp;
}

Vec3 random_in_domain(const MagTile& t, std::mt19937_64& rng, double shrink = 0.9) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Vec3 L = t.half_lengths() * shrink;
  return t.center + Vec3(u(rng) * L.x(), u(rng) * L.y(), u(rng) * L.z());
}

UnitQuaternion random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return {n(rng), n(rng), n(rng), n(rng)};
}

// Potential of the posterior mean, for finite-difference checks.
double potential(const MagTile& t, const Vec3& p) {
  double v = t.mean.head<3>().dot(p);
  for (std::size_t j = 0; j < t.basis->modes.size(); ++j) {
    v += t.mean[static_cast<Eigen::Index>(j + 3)] * eigenfunction(t, j, p);
  }
  return v;
}

}  // namespace

TEST(SpectralDensity, ClosedForm) {
  MagHyperparams hp;
  hp.sigma_se = 1.3;
  hp.lengthscale = 0.4;
  const double s0 = 1.69 * std::pow(2 * M_PI * 0.16, 1.5);
  EXPECT_NEAR(spectral_density_se(0.0, hp), s0, 1e-12 * s0);
  EXPECT_NEAR(spectral_density_se(2.0, hp), s0 * std::exp(-0.5 * 4.0 * 0.16), 1e-12 * s0);
}

TEST(Basis, LowestModesInOrder) {
  const MagHyperparams hp = small_hp(256);
  const MagTile t = build_basis({0, 0, 0}, hp, kGrid);
  ASSERT_EQ(t.basis->modes.size(), 256u);
  EXPECT_EQ(t.basis->state_dim(), 259u);
  const Vec3 L = t.half_lengths();
  EXPECT_NEAR(L.x(), 6.5, 1e-12);
  EXPECT_NEAR(L.z(), 2.6, 1e-12);
  // Exhaustive enumeration oracle for the 256 smallest lambda.
  std::vector<double> all;
  for (int a = 1; a < 40; ++a)
    for (int b = 1; b < 40; ++b)
      for (int c = 1; c < 20; ++c) {
        const double l2 = std::pow(M_PI * a / (2 * L.x()), 2) + std::pow(M_PI * b / (2 * L.y()), 2) +
                          std::pow(M_PI * c / (2 * L.z()), 2);
        all.push_back(std::sqrt(l2));
      }
  std::sort(all.begin(), all.end());
  for (std::size_t j = 0; j < 256; ++j) {
    const auto& m = t.basis->modes[j];
    EXPECT_NEAR(m.lambda, all[j], 1e-12);
    if (j > 0) EXPECT_LE(t.basis->modes[j - 1].lambda, m.lambda);
  }
}

TEST(Basis, PriorCovariance) {
  const MagHyperparams hp = small_hp(32);
  const MagTile t = build_basis({1, -1, 0}, hp, kGrid);
  EXPECT_TRUE(t.mean.isZero());
  EXPECT_DOUBLE_EQ(t.cov(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(t.cov(2, 2), 0.25);
  for (std::size_t j = 0; j < 32; ++j) {
    const auto i = static_cast<Eigen::Index>(j + 3);
    EXPECT_DOUBLE_EQ(t.cov(i, i), spectral_density_se(t.basis->modes[j].lambda, hp));
  }
  EXPECT_DOUBLE_EQ(t.cov(3, 4), 0.0);
  EXPECT_TRUE(t.center.isApprox(center({1, -1, 0}, kGrid)));
}

TEST(Eigenfunction, DirichletBoundaryAndLaplacian) {
  const MagTile t = build_basis({0, 0, 0}, small_hp(256), kGrid);
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> pick(0, 255);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Vec3 L = t.half_lengths();
  for (int k = 0; k < 20; ++k) {
    const std::size_t j = pick(rng);
    for (int axis = 0; axis < 3; ++axis) {
      for (double side : {-1.0, 1.0}) {
        Vec3 p = t.center + Vec3(u(rng) * L.x(), u(rng) * L.y(), u(rng) * L.z());
        p[axis] = t.center[axis] + side * L[axis];
        EXPECT_LT(std::abs(eigenfunction(t, j, p)), 1e-9);
      }
    }
    const Vec3 p = random_in_domain(t, rng, 0.8);
    const double h = 1e-3;
    double lap = 0.0;
    for (int a = 0; a < 3; ++a) {
      Vec3 e = Vec3::Zero();
      e[a] = h;
      lap += (eigenfunction(t, j, p + e) - 2 * eigenfunction(t, j, p) + eigenfunction(t, j, p - e)) /
             (h * h);
    }
    const double lam = t.basis->modes[j].lambda;
    const double phi = eigenfunction(t, j, p);
    if (std::abs(phi) > 1e-3) EXPECT_NEAR(lap / (-lam * lam * phi), 1.0, 1e-4);
  }
}

TEST(Gradients, MatchFiniteDifferences) {
  const MagTile t = build_basis({0, 0, 0}, small_hp(128), kGrid);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 10; ++k) {
    const Vec3 p = random_in_domain(t, rng);
    const GradientMatrix G = basis_gradients(p, t);
    ASSERT_EQ(G.cols(), 131);
    EXPECT_TRUE(G.leftCols<3>().isIdentity());
    for (std::size_t j = 0; j < 128; j += 9) {
      for (int a = 0; a < 3; ++a) {
        Vec3 e = Vec3::Zero();
        e[a] = 1e-6;
        const double fd = (eigenfunction(t, j, p + e) - eigenfunction(t, j, p - e)) / 2e-6;
        EXPECT_NEAR(G(a, static_cast<Eigen::Index>(j + 3)), fd, 1e-7);
      }
    }
  }
}

TEST(Gradients, OutsideDomainThrows) {
  const MagTile t = build_basis({0, 0, 0}, small_hp(16), kGrid);
  EXPECT_THROW(basis_gradients(Vec3(6.6, 0, 0), t), std::out_of_range);
  EXPECT_THROW(make_innovation(t, Pose{Vec3(0, 0, 2.7), {}}, small_hp(16)), std::out_of_range);
  EXPECT_NO_THROW(basis_gradients(Vec3(6.5, 0, 0), t));
}

TEST(Measurement, PredictionMatchesDefinition) {
  const MagHyperparams hp = small_hp(64);
  MagTile t = build_basis({0, 0, 0}, hp, kGrid);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 0.3);
  for (Eigen::Index i = 0; i < t.mean.size(); ++i) t.mean[i] = n(rng);
  const Pose pose{random_in_domain(t, rng), random_quat(rng)};
  const MagPrediction pr = predict_measurement(t, pose, hp);
  const Eigen::MatrixXd C = to_rotation(pose.q).transpose() * basis_gradients(pose.p, t);
  EXPECT_LT((pr.zhat - C * t.mean).norm(), 1e-12);
  EXPECT_LT((pr.S - (C * t.cov * C.transpose() + hp.noise)).norm(), 1e-12);
  // Sensor-frame reading is the rotated world-frame posterior field.
  EXPECT_LT((pr.zhat - pose.q.inverse().rotate(predicted_field(t, pose.p))).norm(), 1e-12);
}

TEST(Measurement, LogLikelihoodIsGaussianDensity) {
  const MagHyperparams hp = small_hp(32);
  const MagTile t = build_basis({0, 0, 0}, hp, kGrid);
  std::mt19937_64 rng(9);
  const Pose pose{random_in_domain(t, rng), random_quat(rng)};
  const Vec3 z(0.3, -0.2, 0.9);
  const MagPrediction pr = predict_measurement(t, pose, hp);
  const Vec3 e = z - pr.zhat;
  const double oracle = -0.5 * (e.dot(pr.S.inverse() * e) + std::log(pr.S.determinant()) +
                                3 * std::log(2 * M_PI));
  EXPECT_NEAR(log_likelihood(t, pose, z, hp), oracle, 1e-10);
}

TEST(KalmanUpdate, SequentialEqualsBatch) {
  const MagHyperparams hp = small_hp(64);
  MagTile seq = build_basis({0, 0, 0}, hp, kGrid);
  const MagTile prior = seq;
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0.0, 1.0);
  const int K = 20;
  Eigen::MatrixXd C(3 * K, seq.mean.size());
  Eigen::VectorXd z(3 * K);
  for (int k = 0; k < K; ++k) {
    const Pose pose{random_in_domain(seq, rng), random_quat(rng)};
    const Vec3 zk(n(rng), n(rng), n(rng));
    C.middleRows(3 * k, 3) = to_rotation(pose.q).transpose() * basis_gradients(pose.p, seq);
    z.segment<3>(3 * k) = zk;
    seq = kalman_update(seq, pose, zk, hp);
  }
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(3 * K, 3 * K);
  for (int k = 0; k < K; ++k) R.block<3, 3>(3 * k, 3 * k) = hp.noise;
  const Eigen::MatrixXd S = C * prior.cov * C.transpose() + R;
  const Eigen::MatrixXd Kg = prior.cov * C.transpose() * S.ldlt().solve(Eigen::MatrixXd::Identity(3 * K, 3 * K));
  const Eigen::VectorXd mean = Kg * z;
  const Eigen::MatrixXd cov = prior.cov - Kg * C * prior.cov;
  EXPECT_LT((seq.mean - mean).norm(), 1e-8);
  EXPECT_LT((seq.cov - cov).norm(), 1e-8);
  EXPECT_LT((seq.cov - seq.cov.transpose()).norm(), 1e-15);
}

TEST(KalmanUpdate, ShrinksPredictiveVariance) {
  const MagHyperparams hp = small_hp(64);
  MagTile t = build_basis({0, 0, 0}, hp, kGrid);
  const Pose pose{Vec3(0.4, 0.2, 0.1), exp_map(Vec3(0.1, 0.0, 0.5))};
  const double before = predict_measurement(t, pose, hp).S.trace();
  t = kalman_update(t, pose, Vec3(0.3, 0.0, -0.5), hp);
  const MagPrediction after = predict_measurement(t, pose, hp);
  EXPECT_LT(after.S.trace(), before);
  EXPECT_GT(after.S.trace(), hp.noise.trace());
  // Posterior mean moves toward the observation.
  EXPECT_LT((after.zhat - Vec3(0.3, 0.0, -0.5)).norm(), Vec3(0.3, 0.0, -0.5).norm());
}

TEST(PosteriorField, CurlFree) {
  const MagHyperparams hp;
  MagTile t = build_basis({0, 0, 0}, hp, kGrid);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 40; ++k) {
    const Pose pose{random_in_domain(t, rng, 0.5), random_quat(rng)};
    kalman_update_inplace(t, make_innovation(t, pose, hp), Vec3(n(rng), n(rng), n(rng)));
  }
  const double h = 1e-3;
  for (int k = 0; k < 50; ++k) {
    const Vec3 p = random_in_domain(t, rng, 0.8);
    Mat3 J;  // J(i, j) = d B_i / d x_j
    for (int j = 0; j < 3; ++j) {
      Vec3 e = Vec3::Zero();
      e[j] = h;
      J.col(j) = (predicted_field(t, p + e) - predicted_field(t, p - e)) / (2 * h);
    }
    const Vec3 curl(J(2, 1) - J(1, 2), J(0, 2) - J(2, 0), J(1, 0) - J(0, 1));
    EXPECT_LT(curl.norm(), 1e-3 * hp.sigma_se);
  }
  // The predicted field is the gradient of the mean potential.
  const Vec3 p(0.3, -0.4, 0.2);
  Vec3 g;
  for (int j = 0; j < 3; ++j) {
    Vec3 e = Vec3::Zero();
    e[j] = 1e-6;
    g[j] = (potential(t, p + e) - potential(t, p - e)) / 2e-6;
  }
  EXPECT_LT((g - predicted_field(t, p)).norm(), 1e-6);
}

TEST(TilesContaining, NearestFirstAndComplete) {
  const MagHyperparams hp;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-12.0, 12.0);
  std::uniform_real_distribution<double> uz(-4.0, 4.0);
  const auto basis = make_tile_basis(small_hp(4), kGrid);
  for (int k = 0; k < 300; ++k) {
    const Vec3 p(u(rng), u(rng), uz(rng));
    const auto tiles = tiles_containing(p, kGrid, hp);
    ASSERT_FALSE(tiles.empty());
    EXPECT_NE(std::find(tiles.begin(), tiles.end(), locate(p, kGrid)), tiles.end());
    // Brute force over a generous window.
    std::set<HexIndex> expect;
    for (int a = -6; a <= 6; ++a)
      for (int b = -8; b <= 8; ++b)
        for (int l = -4; l <= 4; ++l) {
          const MagTile t = build_basis({a, b, l}, kGrid, basis);
          if (t.domain_contains(p)) expect.insert({a, b, l});
        }
    EXPECT_EQ(std::set<HexIndex>(tiles.begin(), tiles.end()), expect);
    for (std::size_t i = 1; i < tiles.size(); ++i) {
      EXPECT_LE((center(tiles[i - 1], kGrid) - p).norm(), (center(tiles[i], kGrid) - p).norm() + 1e-12);
    }
  }
}

TEST(MagMap, CopyOnWriteKeepsValueSemantics) {
  const MagHyperparams hp = small_hp(16);
  MagMap a(hp, kGrid);
  a.ensure({0, 0, 0});
  MagMap b = a;
  EXPECT_TRUE(a.shares_storage(b, {0, 0, 0}));
  const Pose pose{Vec3(0.5, 0.5, 0.0), {}};
  MagTile& tb = b.mutable_tile({0, 0, 0});
  kalman_update_inplace(tb, make_innovation(tb, pose, hp), Vec3(1, 2, 3));
  EXPECT_FALSE(a.shares_storage(b, {0, 0, 0}));
  EXPECT_TRUE(a.find({0, 0, 0})->mean.isZero());
  EXPECT_FALSE(b.find({0, 0, 0})->mean.isZero());
  // A second write to the now-unique tile does not clone again.
  const MagTile* before = b.find({0, 0, 0});
  b.mutable_tile({0, 0, 0});
  EXPECT_EQ(before, b.find({0, 0, 0}));
  EXPECT_EQ(a.basis(), b.basis());
  EXPECT_EQ(a.find({1, 0, 0}), nullptr);
}
