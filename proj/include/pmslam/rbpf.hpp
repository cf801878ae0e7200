#pragma once

// Rao-Blackwellized particle filter: every particle carries a pose, a log
// weight and its own magnetic and motion maps conditioned on its trajectory.
// One filter step per odometry increment:
//
//   propagate  p <- p + dp + e_p,  q <- dq * q * exp(e_q),  (e_p, e_q) ~ N(0, Q)
//   weigh      log w += log p(z_m | x, M_m) + log p(z_u | x, u, M_u)
//   update     Kalman update of every magnetic tile containing p,
//              face counters of the crossed motion tiles
//   normalize, and resample (systematic) when ESS < fraction * N.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "pmslam/magmap.hpp"
#include "pmslam/motionmap.hpp"
#include "pmslam/pdr.hpp"
#include "pmslam/posemath.hpp"

namespace pmslam {

/// Diagonal per-stride covariance: position (m^2) then rotation vector (rad^2).
struct ProcessNoise {
  Vec6 diag = (Vec6() << 0.001, 0.001, 0.01, 2e-6, 2e-6, 2e-6).finished();
};

struct FilterConfig {
  int num_particles = 100;
  ProcessNoise Q;
  double resample_fraction = 0.75;
  std::uint64_t seed = 0;
  MagHyperparams mag;
  HexGridSpec mag_grid{5.0, 2.0, Vec3::Zero()};
  HexGridSpec motion_grid{0.5, 0.125, Vec3::Zero()};
  double p_v = 0.001;
  // Ablations: a disabled likelihood is forced to 1, its map is still built.
  bool use_mag_likelihood = true;
  bool use_motion_likelihood = true;
  // Rotate dp by each particle's heading deviation from the odometry.
  bool rotate_increments = false;

  void validate() const;
};

struct Particle {
  Pose pose;
  double log_weight = 0.0;
  MagMap mag_map;
  MotionMap motion_map;
};

struct StepRecord {
  std::size_t step = 0;
  double t = 0.0;
  Pose pose;  // highest-weight particle
  double ess = 0.0;
  bool resampled = false;
};

/// Per-particle terms of the last step, before normalization.
struct StepTerms {
  std::vector<double> log_weight_prev;
  std::vector<double> log_wm;
  std::vector<double> log_wu;
  std::vector<double> log_weight_unnormalized;
};

/// 1 / sum w^2. Throws std::invalid_argument unless the weights sum to 1
/// within 1e-9.
double ess(std::span<const double> weights);

/// Ancestor indices of systematic resampling: `count` draws (default: one per
/// weight) at u0 + k / count, with u0 in [0, 1 / count).
std::vector<std::size_t> systematic_resample_indices(std::span<const double> weights, double u0,
                                                     std::size_t count = 0);

/// Per-particle stream, a pure function of (seed, particle, step).
std::mt19937_64 particle_rng(std::uint64_t seed, std::uint64_t particle, std::uint64_t step);

/// rotation: optional world-frame yaw applied to dp before adding it.
Particle propagate(const Particle& particle, const OdometryIncrement& u, const ProcessNoise& Q,
                   std::mt19937_64& rng, double dp_yaw = 0.0);

class Rbpf {
 public:
  explicit Rbpf(const FilterConfig& cfg);

  StepRecord step(const OdometryIncrement& u);

  const FilterConfig& config() const { return cfg_; }
  const std::vector<Particle>& particles() const { return particles_; }
  std::vector<double> weights() const;
  double ess() const;
  /// Highest-weight particle (after a resample: its first offspring).
  const Particle& best() const { return particles_[best_]; }
  std::size_t best_index() const { return best_; }
  const StepTerms& last_terms() const { return terms_; }
  std::size_t steps() const { return step_; }

  /// Replaces every particle's magnetic tile (seeding from a known map).
  void seed_mag_tile(const MagTile& tile);

  /// Ensemble-level resampling with the filter's stream for the current step.
  void resample();

 private:
  void weigh_and_update(Particle& p, const Vec3& p_prev, const Vec3& z, std::size_t i);

  FilterConfig cfg_;
  std::vector<Particle> particles_;
  std::size_t best_ = 0;
  std::size_t step_ = 0;
  UnitQuaternion odo_q_;
  StepTerms terms_;
};

}  // namespace pmslam
