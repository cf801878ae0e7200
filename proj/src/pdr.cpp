#include "pmslam/pdr.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace pmslam {
namespace {

void symmetrize(Mat9& P) { P = 0.5 * (P + P.transpose()).eval(); }

// d with fl(from + d) == to; to - from alone can be off by an ulp.
double exact_step(double from, double to) {
  double d = to - from;
  for (int i = 0; i < 8 && from + d != to; ++i) {
    d = std::nextafter(d, from + d < to ? INFINITY : -INFINITY);
  }
  return d;
}

}  // namespace

double glrt_statistic(std::span<const ImuSample> window, double g, double sigma_a,
                      double sigma_w) {
  if (window.size() < 3) {
    throw std::invalid_argument("GLRT window needs at least 3 samples");
  }
  Vec3 fbar = Vec3::Zero();
  for (const auto& s : window) fbar += s.f;
  fbar /= static_cast<double>(window.size());
  const double fn = fbar.norm();
  const Vec3 gdir = fn > 0.0 ? Vec3(fbar / fn) : Vec3::UnitZ();

  const double inv_a2 = 1.0 / (sigma_a * sigma_a);
  const double inv_w2 = 1.0 / (sigma_w * sigma_w);
  double acc = 0.0;
  for (const auto& s : window) {
    acc += s.w.squaredNorm() * inv_w2 + (s.f - g * gdir).squaredNorm() * inv_a2;
  }
  return acc / static_cast<double>(window.size());
}

bool glrt_detect(std::span<const ImuSample> window, double g, double sigma_a,
                 double sigma_w, double gamma) {
  return glrt_statistic(window, g, sigma_a, sigma_w) < gamma;
}

NavState ekf_predict(const NavState& s, const ImuSample& sample, double dt,
                     const PdrConfig& cfg) {
  NavState out;
  out.q = s.q * exp_map(sample.w * dt);
  const Vec3 f_world = out.q.rotate(sample.f);
  out.v = s.v + (f_world - Vec3(0.0, 0.0, cfg.gravity)) * dt;
  out.p = s.p + out.v * dt;

  Mat9 F = Mat9::Identity();
  F.block<3, 3>(0, 3) = Mat3::Identity() * dt;
  F.block<3, 3>(3, 6) = -skew(f_world) * dt;
  Mat9 Qd = Mat9::Zero();
  Qd.block<3, 3>(3, 3) =
      Mat3::Identity() * (cfg.process_sigma_a * cfg.process_sigma_a * dt * dt);
  Qd.block<3, 3>(6, 6) =
      Mat3::Identity() * (cfg.process_sigma_w * cfg.process_sigma_w * dt * dt);
  out.P = F * s.P * F.transpose() + Qd;
  symmetrize(out.P);
  return out;
}

NavState zupt_update(const NavState& s, const PdrConfig& cfg) {
  Eigen::Matrix<double, 3, 9> H = Eigen::Matrix<double, 3, 9>::Zero();
  H.block<3, 3>(0, 3) = Mat3::Identity();
  const Mat3 R = Mat3::Identity() * (cfg.zupt_sigma_v * cfg.zupt_sigma_v);

  const Mat3 S = H * s.P * H.transpose() + R;
  const Eigen::Matrix<double, 9, 3> K = s.P * H.transpose() * S.inverse();
  const Eigen::Matrix<double, 9, 1> dx = K * (-s.v);

  NavState out;
  out.p = s.p + dx.segment<3>(0);
  out.v = s.v + dx.segment<3>(3);
  out.q = exp_map(dx.segment<3>(6)) * s.q;
  const Mat9 IKH = Mat9::Identity() - K * H;
  out.P = IKH * s.P * IKH.transpose() + K * R * K.transpose();
  symmetrize(out.P);
  return out;
}

UnitQuaternion align_level(std::span<const ImuSample> window) {
  Vec3 fbar = Vec3::Zero();
  for (const auto& s : window) fbar += s.f;
  if (fbar.norm() == 0.0) return UnitQuaternion::identity();
  fbar.normalize();
  // Rotation taking the measured up direction onto world +z.
  const Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(fbar, Vec3::UnitZ());
  return UnitQuaternion(q);
}

PdrResult run_pdr(std::span<const ImuSample> log, const PdrConfig& cfg) {
  if (log.empty()) throw std::invalid_argument("empty IMU log");
  const std::size_t n = log.size();
  const std::size_t win = static_cast<std::size_t>(std::max(cfg.detector_window, 3));

  PdrResult res;
  res.stationary.assign(n, false);
  if (n >= win) {
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t half = win / 2;
      std::size_t lo = k >= half ? k - half : 0;
      lo = std::min(lo, n - win);
      res.stationary[k] = glrt_detect(log.subspan(lo, win), cfg.gravity,
                                      cfg.detector_sigma_a, cfg.detector_sigma_w,
                                      cfg.detector_gamma);
    }
  }

  // Stance phases: maximal runs of stationary samples.
  struct Run {
    std::size_t begin, end;  // [begin, end)
  };
  std::vector<Run> runs;
  for (std::size_t k = 0; k < n;) {
    if (!res.stationary[k]) {
      ++k;
      continue;
    }
    std::size_t e = k;
    while (e < n && res.stationary[e]) ++e;
    if (e - k >= static_cast<std::size_t>(cfg.min_stance_samples)) runs.push_back({k, e});
    k = e;
  }
  if (runs.empty()) throw std::runtime_error("no stance phase detected in IMU log");

  std::vector<std::size_t> mids;
  for (const auto& r : runs) mids.push_back(r.begin + (r.end - r.begin - 1) / 2);

  NavState s;
  s.q = align_level(log.subspan(runs.front().begin,
                                std::min<std::size_t>(runs.front().end - runs.front().begin,
                                                      win * 4)));
  s.P.setZero();
  s.P.block<3, 3>(0, 0) = Mat3::Identity() * (cfg.init_sigma_p * cfg.init_sigma_p);
  s.P.block<3, 3>(3, 3) = Mat3::Identity() * (cfg.init_sigma_v * cfg.init_sigma_v);
  s.P.block<3, 3>(6, 6) = Mat3::Identity() * (cfg.init_sigma_att * cfg.init_sigma_att);

  std::size_t next_mid = 0;
  auto record = [&](std::size_t k) {
    while (next_mid < mids.size() && mids[next_mid] == k) {
      res.stances.push_back({k, log[k].t, Pose{s.p, s.q}, log[k].m});
      ++next_mid;
    }
  };

  if (res.stationary[0]) s = zupt_update(s, cfg);
  record(0);
  for (std::size_t k = 1; k < n; ++k) {
    const double dt = log[k].t - log[k - 1].t;
    if (!(dt > 0.0)) throw std::invalid_argument("IMU timestamps must be strictly increasing");
    s = ekf_predict(s, log[k], dt, cfg);
    if (res.stationary[k]) s = zupt_update(s, cfg);
    record(k);
  }
  res.final_state = s;

  // Increments are differenced against the running reconstruction so that
  // composing them from the first stance reproduces each stance position
  // bit for bit.
  Vec3 recon = res.stances.front().pose.p;
  for (std::size_t i = 1; i < res.stances.size(); ++i) {
    const auto& cur = res.stances[i];
    const auto& prev = res.stances[i - 1];
    OdometryIncrement inc;
    inc.t = cur.t;
    for (int a = 0; a < 3; ++a) inc.dp[a] = exact_step(recon[a], cur.pose.p[a]);
    recon += inc.dp;
    inc.dq = cur.pose.q * prev.pose.q.inverse();
    inc.z_m = cur.m;
    res.increments.push_back(inc);
  }
  return res;
}

}  // namespace pmslam
