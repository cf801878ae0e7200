#include "pmslam/rbpf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace pmslam {
namespace {

constexpr std::uint64_t kResampleStream = 0xFFFFFFFFull;

double logsumexp(std::span<const double> x) {
  const double mx = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  return mx + std::log(s);
}

}  // namespace

void FilterConfig::validate() const {
  if (num_particles < 1) throw std::invalid_argument("num_particles must be >= 1");
  if (!(resample_fraction > 0.0 && resample_fraction <= 1.0)) {
    throw std::invalid_argument("resample_fraction must be in (0, 1]");
  }
  if ((Q.diag.array() < 0.0).any()) throw std::invalid_argument("process noise must be >= 0");
  if (!mag.valid()) throw std::invalid_argument("invalid magnetic hyperparameters");
  if (!mag_grid.valid() || !motion_grid.valid()) throw std::invalid_argument("invalid grid");
  if (!(p_v > 0.0 && p_v < 1.0)) throw std::invalid_argument("p_v must be in (0, 1)");
}

double ess(std::span<const double> weights) {
  double s = 0.0, s2 = 0.0;
  for (double w : weights) {
    s += w;
    s2 += w * w;
  }
  if (weights.empty() || std::abs(s - 1.0) > 1e-9) {
    throw std::invalid_argument("ess requires normalized weights");
  }
  return 1.0 / s2;
}

std::vector<std::size_t> systematic_resample_indices(std::span<const double> weights,
                                                     double u0, std::size_t count) {
  const std::size_t n = count == 0 ? weights.size() : count;
  const std::size_t nw = weights.size();
  std::vector<std::size_t> idx(n);
  const double step = 1.0 / static_cast<double>(n);
  double cum = weights.empty() ? 0.0 : weights[0];
  std::size_t i = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double u = u0 + static_cast<double>(k) * step;
    while (u >= cum && i + 1 < nw) cum += weights[++i];
    idx[k] = i;
  }
  return idx;
}

std::mt19937_64 particle_rng(std::uint64_t seed, std::uint64_t particle, std::uint64_t step) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(particle),
                    static_cast<std::uint32_t>(particle >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)};
  return std::mt19937_64(seq);
}

Particle propagate(const Particle& particle, const OdometryIncrement& u, const ProcessNoise& Q,
                   std::mt19937_64& rng, double dp_yaw) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec6 eps;
  for (int i = 0; i < 6; ++i) eps[i] = std::sqrt(Q.diag[i]) * normal(rng);

  Particle out = particle;
  Vec3 dp = u.dp;
  if (dp_yaw != 0.0) dp = Eigen::AngleAxisd(dp_yaw, Vec3::UnitZ()) * dp;
  out.pose.p = particle.pose.p + dp + eps.head<3>();
  out.pose.q = u.dq * particle.pose.q * exp_map(eps.tail<3>());
  return out;
}

Rbpf::Rbpf(const FilterConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const auto n = static_cast<std::size_t>(cfg_.num_particles);
  Particle proto;
  proto.log_weight = -std::log(static_cast<double>(n));
  proto.mag_map = MagMap(cfg_.mag, cfg_.mag_grid);
  proto.motion_map = MotionMap(cfg_.p_v);
  for (const auto& idx : tiles_containing(proto.pose.p, cfg_.mag_grid, cfg_.mag)) {
    proto.mag_map.ensure(idx);
  }
  proto.motion_map.ensure(locate(proto.pose.p, cfg_.motion_grid));
  particles_.assign(n, proto);
}

std::vector<double> Rbpf::weights() const {
  std::vector<double> w(particles_.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(particles_[i].log_weight);
  return w;
}

double Rbpf::ess() const { return pmslam::ess(weights()); }

void Rbpf::seed_mag_tile(const MagTile& tile) {
  for (auto& p : particles_) p.mag_map.set_tile(tile);
}

void Rbpf::weigh_and_update(Particle& p, const Vec3& p_prev, const Vec3& z, std::size_t i) {
  const auto crossings = face_crossings(p_prev, p.pose.p, cfg_.motion_grid);
  const auto mag_tiles = tiles_containing(p.pose.p, cfg_.mag_grid, cfg_.mag);
  for (const auto& idx : mag_tiles) p.mag_map.ensure(idx);

  // Likelihood from the nearest containing tile, evaluated on the pre-update
  // map; the same innovation then drives that tile's update.
  const MagHyperparams& hp = cfg_.mag;
  MagInnovation nearest = make_innovation(*p.mag_map.find(mag_tiles.front()), p.pose, hp);
  const double lwm = cfg_.use_mag_likelihood ? log_likelihood(nearest, z) : 0.0;
  double lwu = 0.0;
  if (cfg_.use_motion_likelihood) {
    lwu = log_motion_weight(p.motion_map, crossings);
  } else {
    for (const auto& c : crossings) {
      p.motion_map.ensure(c.from);
      p.motion_map.ensure(c.to);
    }
  }

  terms_.log_weight_prev[i] = p.log_weight;
  terms_.log_wm[i] = lwm;
  terms_.log_wu[i] = lwu;
  p.log_weight = p.log_weight + (lwm + lwu);
  terms_.log_weight_unnormalized[i] = p.log_weight;

  for (std::size_t t = 0; t < mag_tiles.size(); ++t) {
    MagTile& tile = p.mag_map.mutable_tile(mag_tiles[t]);
    if (t == 0) {
      kalman_update_inplace(tile, nearest, z);
    } else {
      kalman_update_inplace(tile, make_innovation(tile, p.pose, hp), z);
    }
  }
  p.motion_map.record(crossings);
}

void Rbpf::resample() {
  const std::vector<double> w = weights();
  auto rng = particle_rng(cfg_.seed, kResampleStream, step_);
  std::uniform_real_distribution<double> uni(0.0, 1.0 / static_cast<double>(w.size()));
  const auto idx = systematic_resample_indices(w, uni(rng));

  std::vector<Particle> next;
  next.reserve(particles_.size());
  const double lw = -std::log(static_cast<double>(particles_.size()));
  std::size_t new_best = 0;
  bool found = false;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    next.push_back(particles_[idx[k]]);
    next.back().log_weight = lw;
    if (!found && idx[k] == best_) {
      new_best = k;
      found = true;
    }
  }
  particles_ = std::move(next);
  best_ = new_best;
}

StepRecord Rbpf::step(const OdometryIncrement& u) {
  ++step_;
  const std::size_t n = particles_.size();
  terms_.log_weight_prev.assign(n, 0.0);
  terms_.log_wm.assign(n, 0.0);
  terms_.log_wu.assign(n, 0.0);
  terms_.log_weight_unnormalized.assign(n, 0.0);

  const UnitQuaternion odo_prev = odo_q_;
  odo_q_ = u.dq * odo_q_;

  for (std::size_t i = 0; i < n; ++i) {
    Particle& p = particles_[i];
    auto rng = particle_rng(cfg_.seed, i, step_);
    double yaw = 0.0;
    if (cfg_.rotate_increments) yaw = to_euler(p.pose.q * odo_prev.inverse()).yaw;
    const Vec3 p_prev = p.pose.p;
    p = propagate(p, u, cfg_.Q, rng, yaw);
    weigh_and_update(p, p_prev, u.z_m, i);
  }

  std::vector<double> lw(n);
  for (std::size_t i = 0; i < n; ++i) lw[i] = particles_[i].log_weight;
  const double lse = logsumexp(lw);
  if (!std::isfinite(lse)) {
    throw std::runtime_error("particle weights degenerated (all zero or non-finite)");
  }
  for (std::size_t i = 0; i < n; ++i) particles_[i].log_weight = lw[i] - lse;

  best_ = static_cast<std::size_t>(std::max_element(lw.begin(), lw.end()) - lw.begin());

  StepRecord rec;
  rec.step = step_;
  rec.t = u.t;
  rec.pose = particles_[best_].pose;
  rec.ess = ess();
  if (rec.ess < cfg_.resample_fraction * static_cast<double>(n)) {
    resample();
    rec.resampled = true;
  }
  return rec;
}

}  // namespace pmslam
