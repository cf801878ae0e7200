#pragma once

// Zero-velocity-aided strapdown EKF for foot-mounted IMUs. The filter runs at
// the IMU rate and is reduced to one odometry increment per stance phase.

#include <span>
#include <vector>

#include <Eigen/Core>

#include "pmslam/posemath.hpp"

namespace pmslam {

struct ImuSample {
  double t = 0.0;
  Vec3 f = Vec3::Zero();  // specific force, m/s^2, sensor frame
  Vec3 w = Vec3::Zero();  // angular rate, rad/s, sensor frame
  Vec3 m = Vec3::Zero();  // magnetic field, normalized units, sensor frame
};

using Mat9 = Eigen::Matrix<double, 9, 9>;

/// Error state ordering: (dp, dv, dtheta), attitude error in the world frame.
struct NavState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  UnitQuaternion q;
  Mat9 P = Mat9::Zero();
};

struct OdometryIncrement {
  double t = 0.0;
  Vec3 dp = Vec3::Zero();  // world frame
  UnitQuaternion dq;       // q_k = dq * q_{k-1}
  Vec3 z_m = Vec3::Zero(); // stance magnetometer sample, sensor frame
};

struct PdrConfig {
  double gravity = 9.81;
  // Stance detector.
  double detector_sigma_a = 0.01;
  double detector_sigma_w = 0.01;
  double detector_gamma = 3e5;
  int detector_window = 5;
  int min_stance_samples = 3;
  // Process noise of the strapdown propagation.
  double process_sigma_a = 0.5;
  double process_sigma_w = 0.5 * M_PI / 180.0;
  // Zero-velocity pseudo-measurement noise, m/s.
  double zupt_sigma_v = 0.01;
  // Initial error standard deviations.
  double init_sigma_p = 1e-5;
  double init_sigma_v = 1e-5;
  double init_sigma_att = 0.1 * M_PI / 180.0;
};

/// GLRT ("SHOE") statistic
///   T = 1/N sum ( |w|^2 / sigma_w^2 + |f - g fbar/|fbar||^2 / sigma_a^2 ).
double glrt_statistic(std::span<const ImuSample> window, double g, double sigma_a,
                      double sigma_w);

/// True when the window is stationary (T < gamma). Throws
/// std::invalid_argument for windows shorter than 3 samples.
bool glrt_detect(std::span<const ImuSample> window, double g, double sigma_a,
                 double sigma_w, double gamma);

NavState ekf_predict(const NavState& s, const ImuSample& sample, double dt,
                     const PdrConfig& cfg);

/// Zero-velocity measurement update (H = [0 I 0]) in Joseph form.
NavState zupt_update(const NavState& s, const PdrConfig& cfg);

/// Level initial attitude from the mean specific force of a static window,
/// yaw fixed at zero.
UnitQuaternion align_level(std::span<const ImuSample> window);

struct StancePose {
  std::size_t sample = 0;  // index of the stance midpoint in the log
  double t = 0.0;
  Pose pose;
  Vec3 m = Vec3::Zero();
};

struct PdrResult {
  std::vector<StancePose> stances;
  std::vector<OdometryIncrement> increments;  // stances.size() - 1 entries
  std::vector<bool> stationary;               // detector output per sample
  NavState final_state;
};

/// Runs detection, propagation and ZUPTs over a whole log. Throws
/// std::invalid_argument for an empty log and std::runtime_error when no
/// stance phase is found.
PdrResult run_pdr(std::span<const ImuSample> log, const PdrConfig& cfg = {});

inline std::vector<OdometryIncrement> extract_increments(std::span<const ImuSample> log,
                                                         const PdrConfig& cfg = {}) {
  return run_pdr(log, cfg).increments;
}

}  // namespace pmslam
