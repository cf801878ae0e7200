#pragma once

// Trajectory error statistics, the multi-run benchmark and map exports.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pmslam/io.hpp"
#include "pmslam/magmap.hpp"
#include "pmslam/motionmap.hpp"
#include "pmslam/posemath.hpp"
#include "pmslam/rbpf.hpp"
#include "pmslam/sim.hpp"

namespace pmslam {

/// Position RMSE in meters, orientation RMSE in radians (ZYX Euler angles of
/// q_est * q_truth^-1).
struct TrajectoryErrors {
  double horizontal = 0.0;
  double vertical = 0.0;
  double total = 0.0;
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
};

/// Throws std::invalid_argument on a length mismatch or empty input.
TrajectoryErrors rmse(const std::vector<Pose>& est, const std::vector<Pose>& truth);

struct MethodResult {
  TrajectoryErrors rmse;
  double end_point_deviation = 0.0;  // |p_est - p_truth| at the last stride
};

struct RunResult {
  std::uint64_t seed = 0;
  std::map<std::string, MethodResult> methods;
};

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single run
};

struct MethodAggregate {
  Stat horizontal, vertical, total, roll, pitch, yaw, end_point_deviation;
};

/// Method names used as report keys.
inline constexpr const char* kMethodSlam = "slam";
inline constexpr const char* kMethodNoMag = "slam_no_mag";
inline constexpr const char* kMethodNoMotion = "slam_no_motion";
inline constexpr const char* kMethodDeadReckoning = "dead_reckoning";

struct BenchmarkConfig {
  Scenario scenario = sequence_two_scenario();
  FilterConfig filter;
  int runs = 10;
  std::uint64_t seed = 0;
  // Run the two ablated filters next to the full one.
  bool ablations = true;
};

struct RunReport {
  nlohmann::json config;  // effective configuration, all defaults resolved
  std::vector<std::uint64_t> seeds;
  std::vector<RunResult> runs;
  std::map<std::string, MethodAggregate> aggregate;
  bool closed_path = false;
};

/// Run r uses seed + r for both the odometry corruption and the filter; the
/// world is fixed by the scenario. Methods share the same corrupted inputs.
RunReport run_benchmark(const BenchmarkConfig& cfg);

/// Filter over a whole increment log; element 0 is the start pose.
struct SlamOutput {
  std::vector<StepRecord> records;
  std::vector<Pose> trajectory;
  Particle best;
};
SlamOutput run_slam(const std::vector<OdometryIncrement>& incs, const FilterConfig& cfg);

nlohmann::json to_json(const TrajectoryErrors& e);
nlohmann::json to_json(const RunReport& report);
nlohmann::json to_json(const FilterConfig& cfg);
nlohmann::json to_json(const Scenario& sc);
/// Deterministic text form of a report (stable key order, fixed indentation).
std::string report_text(const RunReport& report);

/// Tile-by-tile map export: index, center, domain half-lengths,
/// hyperparameters, mean, covariance diagonal (and optionally full covariance).
nlohmann::json export_mag_map(const MagMap& map, bool full_covariance = false);
/// Inverse of export_mag_map. Tiles without a full covariance get a diagonal
/// one. Throws std::invalid_argument on a format or dimension mismatch.
MagMap import_mag_map(const nlohmann::json& doc);
nlohmann::json export_motion_map(const MotionMap& map, const HexGridSpec& grid);

struct HeatmapGrid {
  double x_min = 0.0, x_max = 0.0;
  double y_min = 0.0, y_max = 0.0;
  double z = 0.0;
  double spacing = 0.25;
};

/// Field norm of the true world on a regular grid. Throws
/// std::invalid_argument for spacing <= 0 or an inverted range.
std::vector<HeatmapCell> export_heatmap(const World& world, const HeatmapGrid& grid);
/// Posterior-mean field norm from the nearest existing tile containing each
/// grid point; points no tile covers are skipped.
std::vector<HeatmapCell> export_heatmap(const MagMap& map, const HeatmapGrid& grid);

}  // namespace pmslam
