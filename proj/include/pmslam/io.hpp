#pragma once

// CSV logs shared by the simulator, the PDR front end and the filter.
// All files carry a header line, use '.' decimals and LF line ends. Doubles
// are written in shortest round-trip form, so write -> read is bit-exact.
//
//   IMU          t,fx,fy,fz,wx,wy,wz,mx,my,mz
//   increments   t,dpx,dpy,dpz,dqw,dqx,dqy,dqz,mx,my,mz
//   truth        t,px,py,pz,qw,qx,qy,qz
//   trajectory   step,t,px,py,pz,qw,qx,qy,qz,ess,resampled
//   heatmap      x,y,norm

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmslam/pdr.hpp"
#include "pmslam/posemath.hpp"
#include "pmslam/rbpf.hpp"

namespace pmslam {

/// Parse failure; line() is 1-based and counts the header.
class CsvError : public std::runtime_error {
 public:
  CsvError(std::size_t line, const std::string& what, const std::string& source = "");
  std::size_t line() const { return line_; }
  const std::string& detail() const { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

struct TimedPose {
  double t = 0.0;
  Pose pose;
};

struct HeatmapCell {
  double x = 0.0;
  double y = 0.0;
  double norm = 0.0;
};

/// Throws CsvError for a bad header, wrong column count, unparsable value or
/// non-increasing time.
std::vector<ImuSample> read_imu(std::istream& in);
void write_imu(std::ostream& out, const std::vector<ImuSample>& log);

std::vector<OdometryIncrement> read_increments(std::istream& in);
void write_increments(std::ostream& out, const std::vector<OdometryIncrement>& incs);

std::vector<TimedPose> read_truth(std::istream& in);
void write_truth(std::ostream& out, const std::vector<TimedPose>& truth);

std::vector<StepRecord> read_trajectory(std::istream& in);
void write_trajectory(std::ostream& out, const std::vector<StepRecord>& records);

std::vector<HeatmapCell> read_heatmap(std::istream& in);
void write_heatmap(std::ostream& out, const std::vector<HeatmapCell>& cells);

/// File wrappers. Throw std::runtime_error when the file cannot be opened.
std::vector<ImuSample> ingest_imu(const std::filesystem::path& path);
std::vector<OdometryIncrement> ingest_increments(const std::filesystem::path& path);
std::vector<TimedPose> ingest_truth(const std::filesystem::path& path);

template <class F>
void write_file(const std::filesystem::path& path, F&& writer);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace pmslam

#include <fstream>

template <class F>
void pmslam::write_file(const std::filesystem::path& path, F&& writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  writer(out);
  if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}
