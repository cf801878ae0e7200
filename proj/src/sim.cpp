#include "pmslam/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>

namespace pmslam {
namespace {

UnitQuaternion yaw_quat(double yaw) {
  return {std::cos(0.5 * yaw), 0.0, 0.0, std::sin(0.5 * yaw)};
}

Vec3 gaussian3(std::mt19937_64& rng, std::normal_distribution<double>& n) {
  const double a = n(rng), b = n(rng), c = n(rng);
  return {a, b, c};
}

}  // namespace

World::World(WorldSpec spec) : spec_(std::move(spec)) {
  if (!((spec_.extent_max - spec_.extent_min).array() > 0.0).all()) {
    throw std::invalid_argument("world extent must be positive on every axis");
  }
  if (spec_.base_field.norm() == 0.0) {
    throw std::invalid_argument("world base field must be nonzero");
  }
  if (spec_.field_model == FieldModel::GpSample) {
    if (!(spec_.gp_lengthscale > 0.0) || !(spec_.gp_sigma >= 0.0) || spec_.gp_features < 1 ||
        !(spec_.gp_band > 0.0)) {
      throw std::invalid_argument("invalid gp-sample parameters");
    }
    // Random Fourier features of an SE potential, frequencies truncated to a
    // ball so the draw is bandlimited.
    std::mt19937_64 rng(spec_.seed);
    std::normal_distribution<double> normal(0.0, 1.0 / spec_.gp_lengthscale);
    std::uniform_real_distribution<double> uni(0.0, 2.0 * M_PI);
    const double wmax = spec_.gp_band / spec_.gp_lengthscale;
    const double a = spec_.gp_sigma * std::sqrt(2.0 / spec_.gp_features);
    while (static_cast<int>(freq_.size()) < spec_.gp_features) {
      const Vec3 w = gaussian3(rng, normal);
      if (w.norm() >= wmax) continue;
      freq_.push_back(w);
      amp_.push_back(a);
      phase_.push_back(uni(rng));
    }
  }
}

bool World::in_extent(const Vec3& p) const {
  return (p.array() >= spec_.extent_min.array()).all() &&
         (p.array() <= spec_.extent_max.array()).all();
}

Vec3 World::field_at(const Vec3& p) const {
  if (!in_extent(p)) throw std::out_of_range("position outside world extent");
  Vec3 b = spec_.base_field;
  if (spec_.field_model == FieldModel::DipoleSum) {
    for (const auto& d : spec_.dipoles) {
      const Vec3 r = p - d.position;
      const double rn = r.norm();
      if (rn < 1e-3) throw std::domain_error("position within 1e-3 m of a dipole");
      const Vec3 rh = r / rn;
      b += (3.0 * d.moment.dot(rh) * rh - d.moment) / (rn * rn * rn);
    }
  } else {
    // field = b0 + grad sum a cos(w.p + phase)
    for (std::size_t i = 0; i < freq_.size(); ++i) {
      b -= amp_[i] * std::sin(freq_[i].dot(p) + phase_[i]) * freq_[i];
    }
  }
  return b;
}

std::vector<Dipole> scatter_dipoles(const DipoleScatter& sc, std::uint64_t seed) {
  if (sc.count < 0 || sc.depth_min > sc.depth_max || sc.moment_min > sc.moment_max) {
    throw std::invalid_argument("invalid dipole scatter");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(sc.area_min.x() - sc.spread,
                                            sc.area_max.x() + sc.spread);
  std::uniform_real_distribution<double> uy(sc.area_min.y() - sc.spread,
                                            sc.area_max.y() + sc.spread);
  std::uniform_real_distribution<double> ud(sc.depth_min, sc.depth_max);
  std::uniform_real_distribution<double> um(sc.moment_min, sc.moment_max);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Dipole> out;
  for (int i = 0; i < sc.count; ++i) {
    Dipole d;
    // Fixed draw order keeps the world a pure function of the seed.
    const double x = ux(rng);
    const double y = uy(rng);
    const double depth = ud(rng);
    d.position = Vec3(x, y, -depth);
    Vec3 dir = gaussian3(rng, normal);
    if (dir.norm() < 1e-12) dir = Vec3::UnitZ();
    d.moment = um(rng) * dir.normalized();
    out.push_back(d);
  }
  return out;
}

std::vector<Pose> gen_truth(const TrajectorySpec& traj) {
  if (!(traj.stride_length > 0.0)) throw std::invalid_argument("stride_length must be > 0");
  if (traj.loop_count < 1) throw std::invalid_argument("loop_count must be >= 1");
  const auto& w = traj.waypoints;
  if (w.size() < 2) throw std::invalid_argument("trajectory needs at least two waypoints");

  std::vector<double> arc{0.0};
  for (std::size_t i = 1; i < w.size(); ++i) {
    const double len = (w[i] - w[i - 1]).norm();
    if (!(len > 0.0)) {
      throw std::invalid_argument("consecutive waypoints " + std::to_string(i - 1) + " and " +
                                  std::to_string(i) + " coincide");
    }
    arc.push_back(arc.back() + len);
  }
  const double total = arc.back();
  const auto n = static_cast<std::size_t>(std::max(1.0, std::round(total / traj.stride_length)));

  auto point_at = [&](std::size_t k) -> Vec3 {
    if (k == 0) return w.front();
    if (k == n) return w.back();
    const double s = total * static_cast<double>(k) / static_cast<double>(n);
    const auto it = std::upper_bound(arc.begin(), arc.end(), s);
    const std::size_t seg = std::min<std::size_t>(it - arc.begin(), w.size() - 1);
    const double u = (s - arc[seg - 1]) / (arc[seg] - arc[seg - 1]);
    return w[seg - 1] + u * (w[seg] - w[seg - 1]);
  };

  std::vector<Vec3> loop(n + 1);
  for (std::size_t k = 0; k <= n; ++k) loop[k] = point_at(k);

  auto heading = [](const Vec3& a, const Vec3& b, double fallback) {
    const Eigen::Vector2d d = (b - a).head<2>();
    return d.norm() > 1e-12 ? std::atan2(d.y(), d.x()) : fallback;
  };

  std::vector<Pose> out;
  out.reserve(n * traj.loop_count + 1);
  double yaw = heading(loop[0], loop[1], 0.0);
  out.push_back({loop[0], yaw_quat(yaw)});
  for (int l = 0; l < traj.loop_count; ++l) {
    for (std::size_t k = 1; k <= n; ++k) {
      // Open polylines jump back to the start between loops.
      const Vec3& from = k == 1 ? out.back().p : loop[k - 1];
      yaw = heading(from, loop[k], yaw);
      out.push_back({loop[k], yaw_quat(yaw)});
    }
  }
  return out;
}

std::vector<OdometryIncrement> corrupt(const std::vector<Pose>& truth, const DriftSpec& drift,
                                       const World& world, const Mat3& mag_noise,
                                       std::mt19937_64& rng, double stride_period) {
  if (truth.size() < 2) throw std::invalid_argument("corrupt needs at least two poses");
  if ((drift.increment_sigma.array() < 0.0).any() || drift.heading_rate < 0.0 ||
      drift.vertical_bias < 0.0) {
    throw std::invalid_argument("drift parameters must be >= 0");
  }
  Mat3 L = Mat3::Zero();
  if (!mag_noise.isZero(0.0)) {
    Eigen::LLT<Mat3> llt(mag_noise);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("mag noise must be SPD");
    L = llt.matrixL();
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  double psi = 0.0;
  Vec3 rho = Vec3::Zero();
  UnitQuaternion q_prev = truth.front().q;
  std::vector<OdometryIncrement> out;
  out.reserve(truth.size() - 1);
  for (std::size_t k = 1; k < truth.size(); ++k) {
    // Draws in a fixed order: heading, position, rotation, magnetometer.
    psi += drift.heading_rate * normal(rng);
    const Vec3 ep = gaussian3(rng, normal);
    const Vec3 er = gaussian3(rng, normal);
    const Vec3 em = gaussian3(rng, normal);
    rho += drift.increment_sigma.tail<3>().cwiseProduct(er);

    const UnitQuaternion q_dr = yaw_quat(psi) * exp_map(rho) * truth[k].q;
    OdometryIncrement inc;
    inc.t = static_cast<double>(k) * stride_period;
    inc.dp = Eigen::AngleAxisd(psi, Vec3::UnitZ()) * (truth[k].p - truth[k - 1].p) +
             drift.increment_sigma.head<3>().cwiseProduct(ep) +
             Vec3(0.0, 0.0, drift.vertical_bias);
    inc.dq = q_dr * q_prev.inverse();
    inc.z_m = truth[k].q.inverse().rotate(world.field_at(truth[k].p)) + L * em;
    q_prev = q_dr;
    out.push_back(inc);
  }
  return out;
}

std::vector<Pose> dead_reckon(const std::vector<OdometryIncrement>& incs, const Pose& start) {
  std::vector<Pose> out{start};
  out.reserve(incs.size() + 1);
  for (const auto& u : incs) {
    const Pose& prev = out.back();
    out.push_back({prev.p + u.dp, u.dq * prev.q});
  }
  return out;
}

ImuNoiseSpec mti100_noise() {
  ImuNoiseSpec n;
  n.acc_sigma = 0.006;
  n.gyro_sigma = 0.0017;
  n.mag_sigma = 0.005;
  n.gyro_bias = Vec3(5e-5, -3e-5, 4e-5);
  return n;
}

std::vector<ImuSample> synth_imu(const std::vector<Pose>& truth, const ImuNoiseSpec& noise,
                                 const GaitSpec& gait, const World* world) {
  if (!(gait.sample_rate >= 50.0)) throw std::invalid_argument("sample rate must be >= 50 Hz");
  if (truth.empty()) throw std::invalid_argument("synth_imu needs at least one pose");
  const double dt = 1.0 / gait.sample_rate;
  const auto ns = static_cast<int>(std::lround(gait.swing_duration * gait.sample_rate));
  const auto nst = static_cast<int>(std::lround(gait.stance_duration * gait.sample_rate));
  const auto n0 = static_cast<int>(std::lround(gait.initial_stance * gait.sample_rate));
  if (ns < 4 || nst < 1 || n0 < 1) throw std::invalid_argument("gait phases too short");

  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Vec3 gz(0.0, 0.0, gait.gravity);

  std::vector<ImuSample> out;
  double t = 0.0;
  UnitQuaternion q_prev = truth.front().q;
  Vec3 v_prev = Vec3::Zero();
  Vec3 p = truth.front().p;

  auto emit = [&](const UnitQuaternion& q, const Vec3& v) {
    ImuSample s;
    s.t = t;
    s.w = log_map(q_prev.inverse() * q) / dt;
    s.f = q.inverse().rotate((v - v_prev) / dt + gz);
    p += v * dt;
    if (world) s.m = q.inverse().rotate(world->field_at(p));
    s.w += noise.gyro_bias + noise.gyro_sigma * gaussian3(rng, normal);
    s.f += noise.acc_bias + noise.acc_sigma * gaussian3(rng, normal);
    s.m += noise.mag_sigma * gaussian3(rng, normal);
    out.push_back(s);
    q_prev = q;
    v_prev = v;
    t += dt;
  };
  auto stance = [&](int count) {
    for (int i = 0; i < count; ++i) emit(q_prev, Vec3::Zero());
  };

  // Swing velocity shape: steep at lift-off and touch-down so the detector
  // sees motion over the whole swing.
  std::vector<double> shape(ns + 1, 0.0);
  double shape_sum = 0.0;
  for (int s = 1; s < ns; ++s) {
    shape[s] = std::sqrt(std::sin(M_PI * s / ns));
    shape_sum += shape[s];
  }

  stance(n0);
  for (std::size_t k = 1; k < truth.size(); ++k) {
    const Vec3 d = truth[k].p - p;
    const double yaw0 = to_euler(truth[k - 1].q).yaw;
    const double dyaw = wrap_pi(to_euler(truth[k].q).yaw - yaw0);
    for (int s = 1; s <= ns; ++s) {
      const double u = static_cast<double>(s) / ns;
      const double ease = u * u * (3.0 - 2.0 * u);
      const double pitch = 0.5 * gait.pitch_peak * (1.0 - std::cos(2.0 * M_PI * u));
      const UnitQuaternion q =
          yaw_quat(yaw0 + dyaw * ease) * UnitQuaternion(std::cos(0.5 * pitch), 0.0,
                                                        std::sin(0.5 * pitch), 0.0);
      Vec3 v = d * (shape[s] / (shape_sum * dt));
      v.z() += s < ns ? gait.lift_speed * std::sin(2.0 * M_PI * u) : 0.0;
      emit(s == ns ? truth[k].q : q, v);
    }
    // Absorb rounding so each stance sits exactly on its truth pose.
    p = truth[k].p;
    stance(nst);
  }
  return out;
}

Scenario sequence_two_scenario() {
  Scenario sc;
  sc.name = "sequence-two";
  const double rise = 0.08;
  sc.trajectory.waypoints = {{0, 0, 0}, {8, 0, 0},    {8, 4, 0}, {7, 5, rise},
                             {1, 5, rise}, {0, 4, 0}, {0, 0, 0}};
  sc.trajectory.stride_length = 0.5;
  sc.trajectory.loop_count = 2;

  sc.world.extent_min = Vec3(-6.0, -7.5, -2.0);
  sc.world.extent_max = Vec3(14.0, 12.5, 2.0);
  sc.world.seed = 11;
  DipoleScatter scatter;
  scatter.count = 8;
  scatter.area_min = {0.0, 0.0};
  scatter.area_max = {8.0, 5.0};
  scatter.depth_min = 1.5;
  scatter.depth_max = 2.5;
  scatter.moment_min = 4.0;
  scatter.moment_max = 10.0;
  sc.world.dipoles = scatter_dipoles(scatter, sc.world.seed);

  // Position random walk of the size the filter's process noise assumes,
  // little heading drift, and a vertical bias.
  sc.drift.increment_sigma << 0.03, 0.03, 0.005, 2e-4, 2e-4, 2e-4;
  sc.drift.heading_rate = 0.001;
  sc.drift.vertical_bias = 0.008;
  sc.mag_noise = 0.01 * Mat3::Identity();
  return sc;
}

Scenario loop_closure_scenario() {
  Scenario sc;
  sc.name = "loop-closure";
  sc.trajectory.waypoints = {{0, 0, 0}, {15, 0, 0}, {15, 10, 0}, {0, 10, 0}, {0, 0, 0}};
  sc.trajectory.stride_length = 0.5;
  sc.trajectory.loop_count = 3;

  sc.world.extent_min = Vec3(-2.5, -5.0, -2.0);
  sc.world.extent_max = Vec3(17.5, 15.0, 2.0);
  sc.world.seed = 23;
  DipoleScatter scatter;
  // Same anomaly density as the sequence-two world.
  scatter.count = 30;
  scatter.area_min = {0.0, 0.0};
  scatter.area_max = {15.0, 10.0};
  scatter.depth_min = 1.5;
  scatter.depth_max = 2.5;
  scatter.moment_min = 4.0;
  scatter.moment_max = 10.0;
  sc.world.dipoles = scatter_dipoles(scatter, sc.world.seed);

  sc.drift.increment_sigma << 0.03, 0.03, 0.005, 2e-4, 2e-4, 2e-4;
  sc.drift.heading_rate = 0.001;
  sc.drift.vertical_bias = 0.006;
  sc.mag_noise = 0.01 * Mat3::Identity();
  return sc;
}

}  // namespace pmslam
