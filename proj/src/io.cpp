#include "pmslam/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace pmslam {
namespace {

constexpr const char* kImuHeader = "t,fx,fy,fz,wx,wy,wz,mx,my,mz";
constexpr const char* kIncrementHeader = "t,dpx,dpy,dpz,dqw,dqx,dqy,dqz,mx,my,mz";
constexpr const char* kTruthHeader = "t,px,py,pz,qw,qx,qy,qz";
constexpr const char* kTrajectoryHeader = "step,t,px,py,pz,qw,qx,qy,qz,ess,resampled";
constexpr const char* kHeatmapHeader = "x,y,norm";

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

// Rows of a headed CSV with a fixed column count, as doubles.
std::vector<std::vector<double>> read_rows(std::istream& in, const std::string& header) {
  const std::size_t cols = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
  std::string line;
  if (!std::getline(in, line)) throw CsvError(1, "missing header, expected '" + header + "'");
  if (strip_cr(line) != header) {
    throw CsvError(1, "unexpected header '" + strip_cr(line) + "', expected '" + header + "'");
  }
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(cols);
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      const std::size_t end = comma == std::string::npos ? line.size() : comma;
      double v = 0.0;
      const char* b = line.data() + pos;
      const char* e = line.data() + end;
      while (b < e && *b == ' ') ++b;
      const auto res = std::from_chars(b, e, v);
      if (res.ec != std::errc() || res.ptr != e) {
        throw CsvError(lineno, "cannot parse field " + std::to_string(row.size() + 1) + " '" +
                                   std::string(line.data() + pos, end - pos) + "'");
      }
      row.push_back(v);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (row.size() != cols) {
      throw CsvError(lineno, "expected " + std::to_string(cols) + " columns, got " +
                                 std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void check_monotone(const std::vector<std::vector<double>>& rows, std::size_t col) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i][col] > rows[i - 1][col])) {
      throw CsvError(i + 2, "time must be strictly increasing");
    }
  }
}

void put(std::ostream& out, std::initializer_list<double> values) {
  bool first = true;
  for (double v : values) {
    if (!first) out << ',';
    out << format_double(v);
    first = false;
  }
  out << '\n';
}

UnitQuaternion quat_from(const std::vector<double>& r, std::size_t i) {
  return {r[i], r[i + 1], r[i + 2], r[i + 3]};
}

template <class T>
std::vector<T> ingest(const std::filesystem::path& path, std::vector<T> (*reader)(std::istream&)) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return reader(in);
  } catch (const CsvError& e) {
    throw CsvError(e.line(), e.detail(), path.string());
  }
}

}  // namespace

CsvError::CsvError(std::size_t line, const std::string& what, const std::string& source)
    : std::runtime_error((source.empty() ? "" : source + ": ") + "line " + std::to_string(line) +
                         ": " + what),
      line_(line),
      detail_(what) {}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<ImuSample> read_imu(std::istream& in) {
  const auto rows = read_rows(in, kImuHeader);
  check_monotone(rows, 0);
  std::vector<ImuSample> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    out.push_back({r[0], {r[1], r[2], r[3]}, {r[4], r[5], r[6]}, {r[7], r[8], r[9]}});
  }
  return out;
}

void write_imu(std::ostream& out, const std::vector<ImuSample>& log) {
  out << kImuHeader << '\n';
  for (const auto& s : log) {
    put(out, {s.t, s.f.x(), s.f.y(), s.f.z(), s.w.x(), s.w.y(), s.w.z(), s.m.x(), s.m.y(),
              s.m.z()});
  }
}

std::vector<OdometryIncrement> read_increments(std::istream& in) {
  const auto rows = read_rows(in, kIncrementHeader);
  check_monotone(rows, 0);
  std::vector<OdometryIncrement> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    out.push_back({r[0], {r[1], r[2], r[3]}, quat_from(r, 4), {r[8], r[9], r[10]}});
  }
  return out;
}

void write_increments(std::ostream& out, const std::vector<OdometryIncrement>& incs) {
  out << kIncrementHeader << '\n';
  for (const auto& u : incs) {
    put(out, {u.t, u.dp.x(), u.dp.y(), u.dp.z(), u.dq.w(), u.dq.x(), u.dq.y(), u.dq.z(),
              u.z_m.x(), u.z_m.y(), u.z_m.z()});
  }
}

std::vector<TimedPose> read_truth(std::istream& in) {
  const auto rows = read_rows(in, kTruthHeader);
  check_monotone(rows, 0);
  std::vector<TimedPose> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({r[0], Pose{{r[1], r[2], r[3]}, quat_from(r, 4)}});
  return out;
}

void write_truth(std::ostream& out, const std::vector<TimedPose>& truth) {
  out << kTruthHeader << '\n';
  for (const auto& tp : truth) {
    const Pose& p = tp.pose;
    put(out, {tp.t, p.p.x(), p.p.y(), p.p.z(), p.q.w(), p.q.x(), p.q.y(), p.q.z()});
  }
}

std::vector<StepRecord> read_trajectory(std::istream& in) {
  const auto rows = read_rows(in, kTrajectoryHeader);
  check_monotone(rows, 0);
  std::vector<StepRecord> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    StepRecord rec;
    rec.step = static_cast<std::size_t>(r[0]);
    rec.t = r[1];
    rec.pose = Pose{{r[2], r[3], r[4]}, quat_from(r, 5)};
    rec.ess = r[9];
    rec.resampled = r[10] != 0.0;
    out.push_back(rec);
  }
  return out;
}

void write_trajectory(std::ostream& out, const std::vector<StepRecord>& records) {
  out << kTrajectoryHeader << '\n';
  for (const auto& r : records) {
    const Pose& p = r.pose;
    put(out, {static_cast<double>(r.step), r.t, p.p.x(), p.p.y(), p.p.z(), p.q.w(), p.q.x(),
              p.q.y(), p.q.z(), r.ess, r.resampled ? 1.0 : 0.0});
  }
}

std::vector<HeatmapCell> read_heatmap(std::istream& in) {
  const auto rows = read_rows(in, kHeatmapHeader);
  std::vector<HeatmapCell> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({r[0], r[1], r[2]});
  return out;
}

void write_heatmap(std::ostream& out, const std::vector<HeatmapCell>& cells) {
  out << kHeatmapHeader << '\n';
  for (const auto& c : cells) put(out, {c.x, c.y, c.norm});
}

std::vector<ImuSample> ingest_imu(const std::filesystem::path& path) {
  return ingest<ImuSample>(path, &read_imu);
}

std::vector<OdometryIncrement> ingest_increments(const std::filesystem::path& path) {
  return ingest<OdometryIncrement>(path, &read_increments);
}

std::vector<TimedPose> ingest_truth(const std::filesystem::path& path) {
  return ingest<TimedPose>(path, &read_truth);
}

}  // namespace pmslam
