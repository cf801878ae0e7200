#include "pmslam/sim.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "pmslam/eval.hpp"
#include "pmslam/pdr.hpp"

using namespace pmslam;

namespace {

Vec3 central_curl(const World& w, const Vec3& p, double h) {
  Mat3 J;
  for (int j = 0; j < 3; ++j) {
    Vec3 e = Vec3::Zero();
    e[j] = h;
    J.col(j) = (w.field_at(p + e) - w.field_at(p - e)) / (2 * h);
  }
  return {J(2, 1) - J(1, 2), J(0, 2) - J(2, 0), J(1, 0) - J(0, 1)};
}

// Central differences at h and 2h, Richardson-combined: the plain h^2 term
// is not symmetric in the Jacobian and alone exceeds 1e-6 near strong dipoles.
Vec3 fd_curl(const World& w, const Vec3& p, double h = 1e-3) {
  return (4.0 * central_curl(w, p, h) - central_curl(w, p, 2 * h)) / 3.0;
}

World open_world() {
  WorldSpec ws;
  ws.extent_min = Vec3(-500, -500, -10);
  ws.extent_max = Vec3(500, 500, 10);
  return World(ws);
}

std::vector<Pose> straight(int strides) {
  TrajectorySpec t;
  t.waypoints = {{0, 0, 0}, {0.5 * strides, 0, 0}};
  return gen_truth(t);
}

double mean_end_error(const std::vector<Pose>& truth, const DriftSpec& d, int seeds) {
  const World world = open_world();
  double acc = 0.0;
  for (int s = 0; s < seeds; ++s) {
    std::mt19937_64 rng(1000 + s);
    const auto dr = dead_reckon(corrupt(truth, d, world, Mat3::Zero(), rng));
    acc += (dr.back().p - truth.back().p).norm();
  }
  return acc / seeds;
}

}  // namespace

TEST(World, UniformWithoutDipoles) {
  const World w{WorldSpec{}};
  EXPECT_EQ(w.field_at(Vec3(1, 2, 0.5)), Vec3(0.3, 0.0, -0.5));
  EXPECT_EQ(w.field_at(Vec3(-9, 9, -1.9)), Vec3(0.3, 0.0, -0.5));
}

TEST(World, DipoleInverseCube) {
  WorldSpec ws;
  ws.base_field = Vec3(1e-9, 0, 0);
  ws.dipoles = {{Vec3(0, 0, -1), Vec3(0.2, -0.4, 1.0)}};
  const World w(ws);
  const Vec3 dir = Vec3(0.3, 0.5, 0.8).normalized();
  const Vec3 near = Vec3(0, 0, -1) + 1.0 * dir;
  const Vec3 far = Vec3(0, 0, -1) + 2.0 * dir;
  const Vec3 b0 = ws.base_field;
  EXPECT_NEAR((w.field_at(far) - b0).norm() / (w.field_at(near) - b0).norm(), 0.125, 1e-12);
  // Closed form on the moment axis: 2 m / r^3.
  const Vec3 axis = ws.dipoles[0].moment.normalized();
  EXPECT_LT((w.field_at(Vec3(0, 0, -1) + axis) - b0 - 2.0 * ws.dipoles[0].moment).norm(), 1e-12);
}

TEST(World, CurlFree) {
  const World w(sequence_two_scenario().world);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ux(-2.0, 10.0), uy(-2.0, 7.0), uz(-0.2, 1.0);
  for (int k = 0; k < 100; ++k) {
    const Vec3 p(ux(rng), uy(rng), uz(rng));
    EXPECT_LT(fd_curl(w, p).norm(), 1e-6) << p.transpose();
  }
}

TEST(World, GpSampleCurlFree) {
  WorldSpec ws;
  ws.field_model = FieldModel::GpSample;
  const World w(ws);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-8.0, 8.0), uz(-1.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const Vec3 p(u(rng), u(rng), uz(rng));
    EXPECT_LT(fd_curl(w, p).norm(), 1e-6) << p.transpose();
  }
}

TEST(World, GpSampleHasVariation) {
  WorldSpec ws;
  ws.field_model = FieldModel::GpSample;
  const World w(ws);
  const Vec3 a = w.field_at(Vec3(0, 0, 0)), b = w.field_at(Vec3(2, 1, 0));
  EXPECT_GT((a - b).norm(), 0.01);
  // Same seed, same field.
  EXPECT_EQ(World(ws).field_at(Vec3(1, 1, 1)), w.field_at(Vec3(1, 1, 1)));
}

TEST(World, Errors) {
  WorldSpec ws;
  ws.dipoles = {{Vec3(0, 0, -1), Vec3(0, 0, 1)}};
  const World w(ws);
  EXPECT_THROW(w.field_at(Vec3(11, 0, 0)), std::out_of_range);
  EXPECT_THROW(w.field_at(Vec3(0, 0, -1 + 5e-4)), std::domain_error);
  ws.extent_max.x() = ws.extent_min.x();
  EXPECT_THROW(World{ws}, std::invalid_argument);
  WorldSpec zero;
  zero.base_field.setZero();
  EXPECT_THROW(World{zero}, std::invalid_argument);
}

TEST(Scatter, SeedFixed) {
  DipoleScatter sc;
  const auto a = scatter_dipoles(sc, 9), b = scatter_dipoles(sc, 9), c = scatter_dipoles(sc, 10);
  ASSERT_EQ(a.size(), 8u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].position, b[i].position);
    EXPECT_EQ(a[i].moment, b[i].moment);
    EXPECT_LE(a[i].position.z(), -sc.depth_min);
    EXPECT_GE(a[i].position.z(), -sc.depth_max);
    EXPECT_GE(a[i].moment.norm(), sc.moment_min - 1e-12);
    EXPECT_LE(a[i].moment.norm(), sc.moment_max + 1e-12);
  }
  EXPECT_NE(a[0].position, c[0].position);
}

TEST(GenTruth, SquareLoop) {
  TrajectorySpec t;
  t.waypoints = {{0, 0, 0}, {10, 0, 0}, {10, 10, 0}, {0, 10, 0}, {0, 0, 0}};
  t.stride_length = 0.5;
  const auto poses = gen_truth(t);
  ASSERT_EQ(poses.size(), 81u);  // start pose plus 80 strides
  EXPECT_LT((poses.back().p - poses.front().p).norm(), 1e-9);
  for (std::size_t k = 1; k < poses.size(); ++k) {
    EXPECT_NEAR((poses[k].p - poses[k - 1].p).norm(), 0.5, 1e-9);
  }
  // Heading follows the path: stride 1 goes +x, stride 25 goes +y.
  EXPECT_NEAR(to_euler(poses[1].q).yaw, 0.0, 1e-12);
  EXPECT_NEAR(to_euler(poses[25].q).yaw, M_PI / 2, 1e-12);
}

TEST(GenTruth, LoopsRepeat) {
  TrajectorySpec t;
  t.waypoints = {{0, 0, 0}, {3, 0, 0}, {3, 2, 0}, {0, 0, 0}};
  const auto one = gen_truth(t);
  t.loop_count = 2;
  const auto two = gen_truth(t);
  ASSERT_EQ(two.size(), 2 * one.size() - 1);
  for (std::size_t k = 1; k < one.size(); ++k) {
    EXPECT_LT((two[k + one.size() - 1].p - one[k].p).norm(), 1e-12);
    EXPECT_LT(geodesic_distance(two[k + one.size() - 1].q, one[k].q), 1e-12);
  }
}

TEST(GenTruth, SlopeIsLinear) {
  TrajectorySpec t;
  t.waypoints = {{0, 0, 0}, {5, 0, 1}};
  t.stride_length = 0.5;
  const auto poses = gen_truth(t);
  for (const auto& p : poses) EXPECT_NEAR(p.p.z(), p.p.x() / 5.0, 1e-12);
}

TEST(GenTruth, Errors) {
  TrajectorySpec t;
  t.waypoints = {{0, 0, 0}, {0, 0, 0}};
  EXPECT_THROW(gen_truth(t), std::invalid_argument);
  t.waypoints = {{0, 0, 0}, {1, 0, 0}};
  t.stride_length = 0.0;
  EXPECT_THROW(gen_truth(t), std::invalid_argument);
}

TEST(Corrupt, IdentityWithoutDrift) {
  WorldSpec ws;
  ws.dipoles = scatter_dipoles(DipoleScatter{}, 2);
  const World world(ws);
  TrajectorySpec t;
  t.waypoints = {{0, 0, 0}, {6, 0, 0}, {6, 4, 0.3}, {0, 0, 0}};
  const auto truth = gen_truth(t);
  std::mt19937_64 rng(1);
  const auto incs = corrupt(truth, DriftSpec{}, world, Mat3::Zero(), rng);
  ASSERT_EQ(incs.size(), truth.size() - 1);
  const auto dr = dead_reckon(incs, truth.front());
  for (std::size_t k = 0; k < truth.size(); ++k) {
    EXPECT_LT((dr[k].p - truth[k].p).norm(), 1e-12);
    EXPECT_LT(geodesic_distance(dr[k].q, truth[k].q), 1e-12);
  }
  for (std::size_t k = 0; k < incs.size(); ++k) {
    EXPECT_EQ(incs[k].z_m, truth[k + 1].q.inverse().rotate(world.field_at(truth[k + 1].p)));
    EXPECT_DOUBLE_EQ(incs[k].t, k + 1.0);
  }
}

TEST(Corrupt, Reproducible) {
  const auto truth = straight(20);
  DriftSpec d;
  d.increment_sigma << 0.01, 0.01, 0.01, 1e-3, 1e-3, 1e-3;
  d.heading_rate = 0.01;
  const World w{WorldSpec{}};
  std::mt19937_64 r1(5), r2(5);
  const auto a = corrupt(truth, d, w, 0.1 * Mat3::Identity(), r1);
  const auto b = corrupt(truth, d, w, 0.1 * Mat3::Identity(), r2);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].dp, b[k].dp);
    EXPECT_EQ(a[k].z_m, b[k].z_m);
    EXPECT_EQ(a[k].dq.vec(), b[k].dq.vec());
  }
}

TEST(Corrupt, HeadingRandomWalkVariance) {
  // 0.005 rad / sqrt(stride) over 400 strides: std 0.1 rad.
  const auto truth = straight(400);
  DriftSpec d;
  d.heading_rate = 0.005;
  const World w = open_world();
  double s2 = 0.0;
  const int seeds = 400;
  for (int s = 0; s < seeds; ++s) {
    std::mt19937_64 rng(s);
    const auto dr = dead_reckon(corrupt(truth, d, w, Mat3::Zero(), rng));
    const double dyaw = to_euler(dr.back().q * truth.back().q.inverse()).yaw;
    s2 += dyaw * dyaw;
  }
  // Chi-square with 400 dof: relative std of the variance estimate ~ 0.07.
  EXPECT_NEAR(std::sqrt(s2 / seeds), 0.1, 0.1 * 0.15);
}

TEST(Corrupt, HeadingDriftGrowsSuperlinearly) {
  DriftSpec d;
  d.heading_rate = 0.004;
  const double e200 = mean_end_error(straight(200), d, 50);
  const double e400 = mean_end_error(straight(400), d, 50);
  // Lateral error of a heading random walk scales as n^1.5.
  EXPECT_GT(e400, 2.2 * e200);
  d.heading_rate = 0.008;
  EXPECT_GT(mean_end_error(straight(400), d, 50), 1.8 * e400);
}

TEST(Corrupt, Errors) {
  const World w{WorldSpec{}};
  std::mt19937_64 rng(0);
  EXPECT_THROW(corrupt(std::vector<Pose>{Pose{}}, DriftSpec{}, w, Mat3::Zero(), rng),
               std::invalid_argument);
  DriftSpec bad;
  bad.vertical_bias = -1.0;
  EXPECT_THROW(corrupt(straight(4), bad, w, Mat3::Zero(), rng), std::invalid_argument);
  EXPECT_THROW(corrupt(straight(4), DriftSpec{}, w, -Mat3::Identity(), rng), std::invalid_argument);
}

TEST(SynthImu, StaticIsGravityOnly) {
  const std::vector<Pose> truth{Pose{}};
  const auto log = synth_imu(truth, ImuNoiseSpec{});
  ASSERT_FALSE(log.empty());
  for (const auto& s : log) {
    EXPECT_LT((s.f - Vec3(0, 0, 9.81)).norm(), 1e-12);
    EXPECT_LT(s.w.norm(), 1e-12);
  }
  EXPECT_THROW(synth_imu(truth, ImuNoiseSpec{}, GaitSpec{40.0}), std::invalid_argument);
}

TEST(SynthImu, StanceAndSwingSeparate) {
  TrajectorySpec t;
  t.waypoints = {{0, 0, 0}, {3, 0, 0}, {3, 2, 0.2}};
  const auto truth = gen_truth(t);
  const GaitSpec gait;
  const auto log = synth_imu(truth, ImuNoiseSpec{}, gait);
  const PdrConfig cfg;
  const int n0 = 100, ns = 40, nst = 60;
  ASSERT_EQ(log.size(), static_cast<std::size_t>(n0 + (truth.size() - 1) * (ns + nst)));
  auto stat = [&](std::size_t start) {
    return glrt_statistic(std::span(log).subspan(start, cfg.detector_window), cfg.gravity,
                          cfg.detector_sigma_a, cfg.detector_sigma_w);
  };
  for (std::size_t k = 0; k + 1 < truth.size(); ++k) {
    const std::size_t swing = n0 + k * (ns + nst);
    const std::size_t stance = swing + ns;
    EXPECT_LT(stat(stance + 10), cfg.detector_gamma) << k;
    for (int s = 2; s + cfg.detector_window < ns - 1; s += 5) {
      EXPECT_GT(stat(swing + s), cfg.detector_gamma) << k << " " << s;
    }
  }
}

TEST(Scenarios, SequenceTwoShape) {
  const Scenario sc = sequence_two_scenario();
  EXPECT_EQ(sc.trajectory.loop_count, 2);
  const Vec3 ext = sc.world.extent_max - sc.world.extent_min;
  EXPECT_EQ(ext, Vec3(20, 20, 4));
  EXPECT_EQ(sc.world.dipoles.size(), 8u);
  const auto truth = gen_truth(sc.trajectory);
  EXPECT_LT((truth.back().p - truth.front().p).norm(), 1e-9);
  double zmax = 0.0;
  for (const auto& p : truth) zmax = std::max(zmax, p.p.z());
  EXPECT_GT(zmax, 0.0);
}

TEST(Scenarios, SequenceTwoDeadReckoningScale) {
  const Scenario sc = sequence_two_scenario();
  const World world(sc.world);
  const auto truth = gen_truth(sc.trajectory);
  double acc = 0.0;
  for (int r = 0; r < 10; ++r) {
    std::mt19937_64 rng(r);
    const auto dr = dead_reckon(corrupt(truth, sc.drift, world, sc.mag_noise, rng));
    acc += rmse(std::vector<Pose>(dr.begin() + 1, dr.end()),
                std::vector<Pose>(truth.begin() + 1, truth.end()))
               .total;
  }
  EXPECT_NEAR(acc / 10, 0.6, 0.15);
}

TEST(Scenarios, LoopClosureScale) {
  const Scenario sc = loop_closure_scenario();
  const World world(sc.world);
  const auto truth = gen_truth(sc.trajectory);
  double len = 0.0;
  for (std::size_t k = 1; k < truth.size(); ++k) len += (truth[k].p - truth[k - 1].p).norm();
  EXPECT_NEAR(len, 150.0, 1e-6);
  double acc = 0.0;
  for (int r = 0; r < 10; ++r) {
    std::mt19937_64 rng(r);
    const auto dr = dead_reckon(corrupt(truth, sc.drift, world, sc.mag_noise, rng));
    acc += (dr.back().p - truth.back().p).norm();
  }
  EXPECT_NEAR(acc / 10, 2.1, 0.5);
}
