#include "pmslam/eval.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace pmslam {
namespace {

using nlohmann::json;

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json mat_json(const Mat3& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
  return rows;
}

json grid_json(const HexGridSpec& g) {
  return {{"radius", g.radius}, {"half_height", g.half_height}, {"origin", vec_json(g.origin)}};
}

json index_json(const HexIndex& i) { return json::array({i.a, i.b, i.layer}); }

Stat stat_of(const std::vector<double>& v) {
  Stat s;
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

json stat_json(const Stat& s) { return {{"mean", s.mean}, {"std", s.std}}; }

MethodResult evaluate(const std::vector<Pose>& est, const std::vector<Pose>& truth) {
  // Stride 0 is the shared start pose and carries no information.
  const std::vector<Pose> e(est.begin() + 1, est.end());
  const std::vector<Pose> t(truth.begin() + 1, truth.end());
  MethodResult r;
  r.rmse = rmse(e, t);
  r.end_point_deviation = (est.back().p - truth.back().p).norm();
  return r;
}

// Reference values of the original real-data evaluation, for comparison
// columns only.
json published_reference() {
  return {
      {"sequence_one_total_rmse",
       {{kMethodSlam, {{"mean", 0.41}, {"std", 0.06}}},
        {kMethodNoMotion, {{"mean", 1.57}, {"std", 0.33}}},
        {kMethodNoMag, {{"mean", 0.66}, {"std", 0.19}}}}},
      {"sequence_two_rmse",
       {{kMethodSlam, {{"total", 0.32}, {"total_std", 0.06}, {"horizontal", 0.31},
                       {"vertical", 0.08}}},
        {kMethodNoMotion, {{"total", 1.56}, {"vertical", 1.52}}},
        {kMethodNoMag, {{"total", 0.53}, {"horizontal", 0.52}}},
        {kMethodDeadReckoning, {{"total", 0.60}}}}},
      {"loop_closure_end_point", {{kMethodSlam, 0.5}, {kMethodDeadReckoning, 2.1}}},
  };
}

}  // namespace

TrajectoryErrors rmse(const std::vector<Pose>& est, const std::vector<Pose>& truth) {
  if (est.size() != truth.size()) {
    throw std::invalid_argument("rmse: estimate has " + std::to_string(est.size()) +
                                " poses, truth has " + std::to_string(truth.size()));
  }
  if (est.empty()) throw std::invalid_argument("rmse: empty trajectories");
  double h = 0.0, v = 0.0, roll = 0.0, pitch = 0.0, yaw = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const Vec3 d = est[i].p - truth[i].p;
    h += d.head<2>().squaredNorm();
    v += d.z() * d.z();
    const EulerAngles e = to_euler(est[i].q * truth[i].q.inverse());
    roll += e.roll * e.roll;
    pitch += e.pitch * e.pitch;
    yaw += e.yaw * e.yaw;
  }
  const double n = static_cast<double>(est.size());
  TrajectoryErrors out;
  out.horizontal = std::sqrt(h / n);
  out.vertical = std::sqrt(v / n);
  out.total = std::sqrt((h + v) / n);
  out.roll = std::sqrt(roll / n);
  out.pitch = std::sqrt(pitch / n);
  out.yaw = std::sqrt(yaw / n);
  return out;
}

SlamOutput run_slam(const std::vector<OdometryIncrement>& incs, const FilterConfig& cfg) {
  Rbpf filter(cfg);
  SlamOutput out;
  out.records.reserve(incs.size());
  out.trajectory.reserve(incs.size() + 1);
  out.trajectory.push_back(filter.best().pose);
  for (const auto& u : incs) {
    out.records.push_back(filter.step(u));
    out.trajectory.push_back(out.records.back().pose);
  }
  out.best = filter.best();
  return out;
}

RunReport run_benchmark(const BenchmarkConfig& cfg) {
  if (cfg.runs < 1) throw std::invalid_argument("runs must be >= 1");
  cfg.filter.validate();
  const World world(cfg.scenario.world);
  const std::vector<Pose> truth = gen_truth(cfg.scenario.trajectory);

  RunReport report;
  report.closed_path = (truth.back().p - truth.front().p).norm() < 1e-9;
  report.config = {{"scenario", to_json(cfg.scenario)},
                   {"filter", to_json(cfg.filter)},
                   {"runs", cfg.runs},
                   {"seed", cfg.seed},
                   {"ablations", cfg.ablations}};

  for (int r = 0; r < cfg.runs; ++r) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(r);
    report.seeds.push_back(seed);
    std::mt19937_64 rng(seed);
    const auto incs = corrupt(truth, cfg.scenario.drift, world, cfg.scenario.mag_noise, rng,
                              cfg.scenario.trajectory.stride_period);

    RunResult run;
    run.seed = seed;
    run.methods[kMethodDeadReckoning] = evaluate(dead_reckon(incs, truth.front()), truth);

    FilterConfig fc = cfg.filter;
    fc.seed = seed;
    run.methods[kMethodSlam] = evaluate(run_slam(incs, fc).trajectory, truth);
    if (cfg.ablations) {
      FilterConfig no_mag = fc;
      no_mag.use_mag_likelihood = false;
      run.methods[kMethodNoMag] = evaluate(run_slam(incs, no_mag).trajectory, truth);
      FilterConfig no_motion = fc;
      no_motion.use_motion_likelihood = false;
      run.methods[kMethodNoMotion] = evaluate(run_slam(incs, no_motion).trajectory, truth);
    }
    report.runs.push_back(std::move(run));
  }

  for (const auto& [name, unused] : report.runs.front().methods) {
    std::vector<double> h, v, t, ro, pi, ya, ep;
    for (const auto& run : report.runs) {
      const MethodResult& m = run.methods.at(name);
      h.push_back(m.rmse.horizontal);
      v.push_back(m.rmse.vertical);
      t.push_back(m.rmse.total);
      ro.push_back(m.rmse.roll);
      pi.push_back(m.rmse.pitch);
      ya.push_back(m.rmse.yaw);
      ep.push_back(m.end_point_deviation);
    }
    report.aggregate[name] = {stat_of(h),  stat_of(v),  stat_of(t), stat_of(ro),
                              stat_of(pi), stat_of(ya), stat_of(ep)};
  }
  return report;
}

json to_json(const TrajectoryErrors& e) {
  return {{"horizontal", e.horizontal}, {"vertical", e.vertical}, {"total", e.total},
          {"roll", e.roll},             {"pitch", e.pitch},       {"yaw", e.yaw}};
}

json to_json(const FilterConfig& c) {
  json q = json::array();
  for (int i = 0; i < 6; ++i) q.push_back(c.Q.diag[i]);
  return {{"num_particles", c.num_particles},
          {"process_noise_diag", q},
          {"resample_fraction", c.resample_fraction},
          {"seed", c.seed},
          {"mag",
           {{"lengthscale", c.mag.lengthscale},
            {"sigma_se", c.mag.sigma_se},
            {"sigma_lin", c.mag.sigma_lin},
            {"noise", mat_json(c.mag.noise)},
            {"num_basis", c.mag.num_basis},
            {"margin", c.mag.margin}}},
          {"mag_grid", grid_json(c.mag_grid)},
          {"motion_grid", grid_json(c.motion_grid)},
          {"p_v", c.p_v},
          {"use_mag_likelihood", c.use_mag_likelihood},
          {"use_motion_likelihood", c.use_motion_likelihood},
          {"rotate_increments", c.rotate_increments}};
}

json to_json(const Scenario& sc) {
  json dipoles = json::array();
  for (const auto& d : sc.world.dipoles) {
    dipoles.push_back({{"position", vec_json(d.position)}, {"moment", vec_json(d.moment)}});
  }
  json waypoints = json::array();
  for (const auto& w : sc.trajectory.waypoints) waypoints.push_back(vec_json(w));
  json sigma = json::array();
  for (int i = 0; i < 6; ++i) sigma.push_back(sc.drift.increment_sigma[i]);
  return {
      {"name", sc.name},
      {"world",
       {{"field_model", sc.world.field_model == FieldModel::DipoleSum ? "dipole-sum" : "gp-sample"},
        {"base_field", vec_json(sc.world.base_field)},
        {"dipoles", dipoles},
        {"gp", {{"lengthscale", sc.world.gp_lengthscale}, {"sigma", sc.world.gp_sigma},
                {"band", sc.world.gp_band}, {"features", sc.world.gp_features}}},
        {"extent_min", vec_json(sc.world.extent_min)},
        {"extent_max", vec_json(sc.world.extent_max)},
        {"seed", sc.world.seed}}},
      {"trajectory",
       {{"waypoints", waypoints},
        {"stride_length", sc.trajectory.stride_length},
        {"loop_count", sc.trajectory.loop_count},
        {"stride_period", sc.trajectory.stride_period}}},
      {"drift",
       {{"increment_sigma", sigma},
        {"heading_rate", sc.drift.heading_rate},
        {"vertical_bias", sc.drift.vertical_bias}}},
      {"mag_noise", mat_json(sc.mag_noise)},
  };
}

json to_json(const RunReport& report) {
  json runs = json::array();
  for (const auto& run : report.runs) {
    json methods = json::object();
    for (const auto& [name, m] : run.methods) {
      methods[name] = {{"rmse", to_json(m.rmse)},
                       {"end_point_deviation", m.end_point_deviation}};
    }
    runs.push_back({{"seed", run.seed}, {"methods", methods}});
  }
  json agg = json::object();
  for (const auto& [name, a] : report.aggregate) {
    agg[name] = {{"horizontal", stat_json(a.horizontal)},
                 {"vertical", stat_json(a.vertical)},
                 {"total", stat_json(a.total)},
                 {"roll", stat_json(a.roll)},
                 {"pitch", stat_json(a.pitch)},
                 {"yaw", stat_json(a.yaw)},
                 {"end_point_deviation", stat_json(a.end_point_deviation)}};
  }
  return {{"config", report.config},
          {"seeds", report.seeds},
          {"closed_path", report.closed_path},
          {"runs", runs},
          {"aggregate", agg},
          {"reference", published_reference()}};
}

std::string report_text(const RunReport& report) { return to_json(report).dump(2) + "\n"; }

json export_mag_map(const MagMap& map, bool full_covariance) {
  const MagHyperparams& hp = map.hyperparams();
  json tiles = json::array();
  map.for_each([&](const MagTile& t) {
    json tile = {{"index", index_json(t.idx)},
                 {"center", vec_json(t.center)},
                 {"half_lengths", vec_json(t.half_lengths())},
                 {"mean", std::vector<double>(t.mean.data(), t.mean.data() + t.mean.size())}};
    std::vector<double> diag(static_cast<std::size_t>(t.cov.rows()));
    for (Eigen::Index i = 0; i < t.cov.rows(); ++i) diag[i] = t.cov(i, i);
    tile["cov_diag"] = diag;
    if (full_covariance) {
      std::vector<double> full(t.cov.data(), t.cov.data() + t.cov.size());
      tile["cov"] = full;  // column-major, state_dim x state_dim
    }
    tiles.push_back(std::move(tile));
  });
  json modes = json::array();
  for (const auto& m : map.basis()->modes) {
    modes.push_back({{"n", m.n}, {"lambda", m.lambda}});
  }
  return {{"format", "pmslam-magmap-1"},
          {"grid", grid_json(map.grid())},
          {"hyperparameters",
           {{"lengthscale", hp.lengthscale},
            {"sigma_se", hp.sigma_se},
            {"sigma_lin", hp.sigma_lin},
            {"noise", mat_json(hp.noise)},
            {"num_basis", hp.num_basis},
            {"margin", hp.margin}}},
          {"modes", modes},
          {"tiles", tiles}};
}

MagMap import_mag_map(const json& doc) {
  if (doc.value("format", "") != "pmslam-magmap-1") {
    throw std::invalid_argument("not a pmslam-magmap-1 document");
  }
  auto vec3 = [](const json& a) { return Vec3(a.at(0), a.at(1), a.at(2)); };
  const json& g = doc.at("grid");
  const HexGridSpec grid{g.at("radius"), g.at("half_height"), vec3(g.at("origin"))};
  const json& h = doc.at("hyperparameters");
  MagHyperparams hp;
  hp.lengthscale = h.at("lengthscale");
  hp.sigma_se = h.at("sigma_se");
  hp.sigma_lin = h.at("sigma_lin");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) hp.noise(r, c) = h.at("noise").at(r).at(c);
  hp.num_basis = h.at("num_basis");
  hp.margin = h.at("margin");
  MagMap map(hp, grid);
  const auto dim = static_cast<Eigen::Index>(map.basis()->state_dim());
  for (const json& t : doc.at("tiles")) {
    const json& i = t.at("index");
    MagTile tile = build_basis({i.at(0), i.at(1), i.at(2)}, grid, map.basis());
    const auto mean = t.at("mean").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(mean.size()) != dim) {
      throw std::invalid_argument("tile mean has the wrong dimension");
    }
    tile.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), dim);
    if (t.contains("cov")) {
      const auto cov = t.at("cov").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(cov.size()) != dim * dim) {
        throw std::invalid_argument("tile covariance has the wrong dimension");
      }
      tile.cov = Eigen::Map<const Eigen::MatrixXd>(cov.data(), dim, dim);
    } else {
      const auto diag = t.at("cov_diag").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(diag.size()) != dim) {
        throw std::invalid_argument("tile covariance has the wrong dimension");
      }
      tile.cov = Eigen::Map<const Eigen::VectorXd>(diag.data(), dim).asDiagonal();
    }
    map.set_tile(std::move(tile));
  }
  return map;
}

json export_motion_map(const MotionMap& map, const HexGridSpec& grid) {
  json tiles = json::array();
  for (const auto& [idx, t] : map.tiles()) {
    std::vector<double> probs;
    for (int f = 1; f <= 8; ++f) probs.push_back(transition_prob(t, f));
    tiles.push_back({{"index", index_json(idx)},
                     {"center", vec_json(center(idx, grid))},
                     {"counts", t.counts},
                     {"probabilities", probs}});
  }
  return {{"format", "pmslam-motionmap-1"},
          {"grid", grid_json(grid)},
          {"p_v", map.p_v()},
          {"tiles", tiles}};
}

namespace {

template <class F>
std::vector<HeatmapCell> sweep(const HeatmapGrid& g, F&& value) {
  if (!(g.spacing > 0.0)) throw std::invalid_argument("heatmap spacing must be > 0");
  if (g.x_max < g.x_min || g.y_max < g.y_min) {
    throw std::invalid_argument("heatmap range is inverted");
  }
  const auto nx = static_cast<long>(std::floor((g.x_max - g.x_min) / g.spacing + 1e-9)) + 1;
  const auto ny = static_cast<long>(std::floor((g.y_max - g.y_min) / g.spacing + 1e-9)) + 1;
  std::vector<HeatmapCell> out;
  for (long j = 0; j < ny; ++j) {
    for (long i = 0; i < nx; ++i) {
      const Vec3 p(g.x_min + static_cast<double>(i) * g.spacing,
                   g.y_min + static_cast<double>(j) * g.spacing, g.z);
      if (const auto v = value(p)) out.push_back({p.x(), p.y(), *v});
    }
  }
  return out;
}

}  // namespace

std::vector<HeatmapCell> export_heatmap(const World& world, const HeatmapGrid& grid) {
  return sweep(grid, [&](const Vec3& p) -> std::optional<double> {
    if (!world.in_extent(p)) return std::nullopt;
    return world.field_at(p).norm();
  });
}

std::vector<HeatmapCell> export_heatmap(const MagMap& map, const HeatmapGrid& grid) {
  return sweep(grid, [&](const Vec3& p) -> std::optional<double> {
    for (const auto& idx : tiles_containing(p, map.grid(), map.hyperparams())) {
      if (const MagTile* t = map.find(idx)) return predicted_field(*t, p).norm();
    }
    return std::nullopt;
  });
}

}  // namespace pmslam
