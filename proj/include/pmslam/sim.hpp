#pragma once

// Synthetic worlds for desk-scale experiments: curl-free magnetic fields,
// stride-level ground truth along polylines, drift-corrupted odometry and
// raw foot-mounted IMU logs.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pmslam/pdr.hpp"
#include "pmslam/posemath.hpp"

namespace pmslam {

enum class FieldModel { DipoleSum, GpSample };

struct Dipole {
  Vec3 position = Vec3::Zero();
  Vec3 moment = Vec3::Zero();
};

struct WorldSpec {
  FieldModel field_model = FieldModel::DipoleSum;
  Vec3 base_field{0.3, 0.0, -0.5};
  std::vector<Dipole> dipoles;
  // gp-sample parameters: random Fourier features of an SE potential.
  double gp_lengthscale = 1.0;
  double gp_sigma = 1.0;
  double gp_band = 3.0;  // frequencies kept below gp_band / lengthscale
  int gp_features = 256;
  Vec3 extent_min{-10.0, -10.0, -2.0};
  Vec3 extent_max{10.0, 10.0, 2.0};
  std::uint64_t seed = 1;
};

class World {
 public:
  explicit World(WorldSpec spec);

  const WorldSpec& spec() const { return spec_; }
  bool in_extent(const Vec3& p) const;

  /// World-frame field. Throws std::out_of_range outside the extent and
  /// std::domain_error within 1e-3 m of a dipole.
  Vec3 field_at(const Vec3& p) const;

 private:
  WorldSpec spec_;
  std::vector<Vec3> freq_;
  std::vector<double> amp_, phase_;
};

/// Dipoles drawn around (not on) a walking area: positions uniform in the xy
/// box grown by `spread`, depth uniform in [depth_min, depth_max] below z = 0,
/// moments with uniform direction and magnitude in [moment_min, moment_max].
struct DipoleScatter {
  int count = 8;
  Eigen::Vector2d area_min{0.0, 0.0};
  Eigen::Vector2d area_max{10.0, 10.0};
  double spread = 1.0;
  double depth_min = 0.8;
  double depth_max = 1.6;
  double moment_min = 1.0;
  double moment_max = 3.0;
};

std::vector<Dipole> scatter_dipoles(const DipoleScatter& scatter, std::uint64_t seed);

struct TrajectorySpec {
  /// Polyline walked once per loop; equal first and last points close it.
  std::vector<Vec3> waypoints;
  double stride_length = 0.5;
  int loop_count = 1;
  double stride_period = 1.0;  // seconds per stride
};

/// Poses at stride spacing along the polyline, element 0 being the start
/// pose; a path of n strides gives n + 1 poses. Each loop restarts at the
/// first waypoint and ends exactly on the last one. Heading follows the
/// horizontal direction of the arriving stride (the first stride's for the
/// start pose).
std::vector<Pose> gen_truth(const TrajectorySpec& traj);

struct DriftSpec {
  Vec6 increment_sigma = Vec6::Zero();  // position m, rotation rad, per stride
  double heading_rate = 0.0;            // rad / sqrt(stride)
  double vertical_bias = 0.0;           // m / stride
};

/// Stride increments as a drifting odometry would report them, with the
/// magnetometer sampled at the true poses:
///   z_m = R(q_true)^T field(p_true) + N(0, mag_noise).
/// Element k describes the motion from truth[k] to truth[k + 1].
std::vector<OdometryIncrement> corrupt(const std::vector<Pose>& truth, const DriftSpec& drift,
                                       const World& world, const Mat3& mag_noise,
                                       std::mt19937_64& rng, double stride_period = 1.0);

/// Composes increments from the origin: p += dp, q = dq * q.
std::vector<Pose> dead_reckon(const std::vector<OdometryIncrement>& incs,
                              const Pose& start = {});

struct ImuNoiseSpec {
  double acc_sigma = 0.0;   // m/s^2 per sample
  double gyro_sigma = 0.0;  // rad/s per sample
  double mag_sigma = 0.0;
  Vec3 acc_bias = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();
  std::uint64_t seed = 7;
};

/// MTi-100 class white noise at 100 Hz and a small residual gyro bias.
ImuNoiseSpec mti100_noise();

struct GaitSpec {
  double sample_rate = 100.0;
  double swing_duration = 0.4;
  double stance_duration = 0.6;
  double initial_stance = 1.0;
  double lift_speed = 0.45;   // peak vertical speed, m/s
  double pitch_peak = 0.9;    // peak foot pitch, rad
  double gravity = 9.81;
};

/// IMU log walking through the truth poses: static stances at each pose and
/// a swing between consecutive poses. Samples follow the discrete strapdown
/// recursion used by the PDR exactly, so a noiseless log integrates back onto
/// the truth. Throws std::invalid_argument for sample rates below 50 Hz.
std::vector<ImuSample> synth_imu(const std::vector<Pose>& truth, const ImuNoiseSpec& noise,
                                 const GaitSpec& gait = {}, const World* world = nullptr);

/// A world, a path through it and the odometry drift used to corrupt it.
struct Scenario {
  std::string name;
  WorldSpec world;
  TrajectorySpec trajectory;
  DriftSpec drift;
  Mat3 mag_noise = 0.1 * Mat3::Identity();  // magnetometer noise of the samples
};

/// 8 m x 5 m rectangle walked twice; the two far corners are cut by sloped
/// chords so the back edge runs slightly raised. 20 x 20 x 4 m world with
/// 8 seed-fixed dipoles below the floor.
Scenario sequence_two_scenario();

/// 15 m x 10 m rectangle walked three times (150 m, closed) in a
/// 20 x 20 x 4 m world, drift sized for about 2 m end-point error.
Scenario loop_closure_scenario();

}  // namespace pmslam
