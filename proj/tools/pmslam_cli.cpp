// pmslam command line: pdr, slam, simulate, bench, export-heatmap.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "pmslam/eval.hpp"
#include "pmslam/io.hpp"
#include "pmslam/pdr.hpp"
#include "pmslam/rbpf.hpp"
#include "pmslam/sim.hpp"

using namespace pmslam;
namespace fs = std::filesystem;

namespace {

struct FilterFlags {
  FilterConfig cfg;
  std::vector<double> q;
  double mag_noise = 0.1;
  bool no_mag = false;
  bool no_motion = false;

  void add(CLI::App* app, bool with_seed) {
    app->add_option("--particles", cfg.num_particles, "Particle count")->capture_default_str();
    app->add_option("--q", q, "Process noise diagonal: px py pz rx ry rz (m^2, rad^2)")
        ->expected(6);
    app->add_option("--resample-fraction", cfg.resample_fraction, "Resample when ESS < f * N")
        ->capture_default_str();
    if (with_seed) app->add_option("--seed", cfg.seed, "Filter seed")->capture_default_str();
    app->add_option("--lengthscale", cfg.mag.lengthscale, "SE lengthscale, m")->capture_default_str();
    app->add_option("--sigma-se", cfg.mag.sigma_se, "SE magnitude")->capture_default_str();
    app->add_option("--sigma-lin", cfg.mag.sigma_lin, "Linear-kernel magnitude")->capture_default_str();
    app->add_option("--mag-noise", mag_noise, "Magnetometer noise variance (times I)")
        ->capture_default_str();
    app->add_option("--num-basis", cfg.mag.num_basis, "Basis functions per tile")->capture_default_str();
    app->add_option("--margin", cfg.mag.margin, "Tile domain margin factor")->capture_default_str();
    app->add_option("--mag-radius", cfg.mag_grid.radius, "Magnetic tile radius, m")->capture_default_str();
    app->add_option("--mag-half-height", cfg.mag_grid.half_height, "Magnetic tile half height, m")
        ->capture_default_str();
    app->add_option("--motion-radius", cfg.motion_grid.radius, "Motion tile radius, m")
        ->capture_default_str();
    app->add_option("--motion-half-height", cfg.motion_grid.half_height,
                    "Motion tile half height, m")
        ->capture_default_str();
    app->add_option("--p-v", cfg.p_v, "Vertical face probability")->capture_default_str();
    app->add_flag("--no-mag", no_mag, "Force the magnetic likelihood to 1");
    app->add_flag("--no-motion", no_motion, "Force the motion likelihood to 1");
    app->add_flag("--rotate-increments", cfg.rotate_increments,
                  "Rotate dp by each particle's heading deviation");
  }

  FilterConfig resolve() const {
    FilterConfig c = cfg;
    if (!q.empty()) {
      for (int i = 0; i < 6; ++i) c.Q.diag[i] = q[static_cast<std::size_t>(i)];
    }
    c.mag.noise = mag_noise * Mat3::Identity();
    c.use_mag_likelihood = !no_mag;
    c.use_motion_likelihood = !no_motion;
    c.validate();
    return c;
  }
};

Scenario scenario_by_name(const std::string& name) {
  if (name == "sequence-two") return sequence_two_scenario();
  if (name == "loop-closure") return loop_closure_scenario();
  throw CLI::ValidationError("--scenario", "unknown scenario '" + name + "'");
}

struct DriftFlags {
  std::optional<double> heading_rate, vertical_bias, position_sigma, rotation_sigma, mag_noise;

  void add(CLI::App* app) {
    app->add_option("--heading-rate", heading_rate, "Heading random walk, rad/sqrt(stride)");
    app->add_option("--vertical-bias", vertical_bias, "Vertical bias, m/stride");
    app->add_option("--position-sigma", position_sigma, "Horizontal increment noise, m/stride");
    app->add_option("--rotation-sigma", rotation_sigma, "Rotation increment noise, rad/stride");
    app->add_option("--sample-mag-noise", mag_noise, "Simulated magnetometer noise variance");
  }

  void apply(Scenario& sc) const {
    if (heading_rate) sc.drift.heading_rate = *heading_rate;
    if (vertical_bias) sc.drift.vertical_bias = *vertical_bias;
    if (position_sigma) sc.drift.increment_sigma.head<2>().setConstant(*position_sigma);
    if (rotation_sigma) sc.drift.increment_sigma.tail<3>().setConstant(*rotation_sigma);
    if (mag_noise) sc.mag_noise = *mag_noise * Mat3::Identity();
  }
};

void write_json(const fs::path& path, const nlohmann::json& doc) {
  write_file(path, [&](std::ostream& o) { o << doc.dump(2) << '\n'; });
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return nlohmann::json::parse(in);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Magnetic-field and motion-map pedestrian SLAM"};
  app.require_subcommand(1);

  // pdr
  auto* pdr = app.add_subcommand("pdr", "Foot-mounted IMU log to stride increments");
  std::string pdr_in, pdr_out;
  PdrConfig pdr_cfg;
  pdr->add_option("--imu", pdr_in, "IMU CSV")->required()->check(CLI::ExistingFile);
  pdr->add_option("--out", pdr_out, "Increment CSV")->required();
  pdr->add_option("--gravity", pdr_cfg.gravity)->capture_default_str();
  pdr->add_option("--detector-sigma-a", pdr_cfg.detector_sigma_a)->capture_default_str();
  pdr->add_option("--detector-sigma-w", pdr_cfg.detector_sigma_w)->capture_default_str();
  pdr->add_option("--detector-gamma", pdr_cfg.detector_gamma)->capture_default_str();
  pdr->add_option("--detector-window", pdr_cfg.detector_window)->capture_default_str();
  pdr->add_option("--zupt-sigma-v", pdr_cfg.zupt_sigma_v)->capture_default_str();

  // slam
  auto* slam = app.add_subcommand("slam", "Run the filter over an increment log");
  std::string slam_in, slam_out, slam_mag, slam_motion, slam_truth, slam_report;
  bool slam_full_cov = false;
  FilterFlags slam_flags;
  slam->add_option("--increments", slam_in, "Increment CSV")->required()->check(CLI::ExistingFile);
  slam->add_option("--out", slam_out, "Trajectory CSV")->required();
  slam->add_option("--mag-map", slam_mag, "Write the best particle's magnetic map (JSON)");
  slam->add_option("--motion-map", slam_motion, "Write the best particle's motion map (JSON)");
  slam->add_flag("--full-cov", slam_full_cov, "Include full tile covariances in --mag-map");
  slam->add_option("--truth", slam_truth, "Ground-truth CSV for an error report")
      ->check(CLI::ExistingFile);
  slam->add_option("--report", slam_report, "Error report path (needs --truth)");
  slam_flags.add(slam, true);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic run");
  std::string sim_scenario = "sequence-two", sim_dir;
  std::uint64_t sim_seed = 0;
  bool sim_imu = false, sim_noiseless = false;
  DriftFlags sim_drift;
  sim->add_option("--scenario", sim_scenario, "sequence-two | loop-closure")->capture_default_str();
  sim->add_option("--seed", sim_seed, "Corruption seed")->capture_default_str();
  sim->add_option("--out-dir", sim_dir, "Output directory")->required();
  sim->add_flag("--imu", sim_imu, "Also synthesize a raw IMU log");
  sim->add_flag("--noiseless-imu", sim_noiseless, "IMU log without sensor noise");
  sim_drift.add(sim);

  // bench
  auto* bench = app.add_subcommand("bench", "Multi-run synthetic benchmark");
  std::string bench_scenario = "sequence-two", bench_out;
  BenchmarkConfig bench_cfg;
  bool bench_no_ablations = false;
  FilterFlags bench_flags;
  DriftFlags bench_drift;
  bench->add_option("--scenario", bench_scenario, "sequence-two | loop-closure")
      ->capture_default_str();
  bench->add_option("--runs", bench_cfg.runs, "Number of runs")->capture_default_str();
  bench->add_option("--seed", bench_cfg.seed, "First run seed")->capture_default_str();
  bench->add_option("--out", bench_out, "Report path (default stdout)");
  bench->add_flag("--no-ablations", bench_no_ablations, "Skip the ablated filters");
  bench_flags.add(bench, false);
  bench_drift.add(bench);

  // export-heatmap
  auto* heat = app.add_subcommand("export-heatmap", "Field-norm grid from a world or a map");
  std::string heat_scenario, heat_map, heat_out;
  HeatmapGrid grid;
  std::optional<double> x_min, x_max, y_min, y_max;
  heat->add_option("--scenario", heat_scenario, "True field of a scenario world");
  heat->add_option("--map", heat_map, "Magnetic map JSON written by slam")->check(CLI::ExistingFile);
  heat->add_option("--out", heat_out, "Heatmap CSV")->required();
  heat->add_option("--z", grid.z, "Grid height, m")->capture_default_str();
  heat->add_option("--spacing", grid.spacing, "Grid spacing, m")->capture_default_str();
  heat->add_option("--x-min", x_min);
  heat->add_option("--x-max", x_max);
  heat->add_option("--y-min", y_min);
  heat->add_option("--y-max", y_max);

  CLI11_PARSE(app, argc, argv);

  try {
    if (pdr->parsed()) {
      const auto log = ingest_imu(pdr_in);
      const auto res = run_pdr(log, pdr_cfg);
      write_file(pdr_out, [&](std::ostream& o) { write_increments(o, res.increments); });
      std::cerr << res.increments.size() << " strides\n";
    } else if (slam->parsed()) {
      const FilterConfig cfg = slam_flags.resolve();
      const auto incs = ingest_increments(slam_in);
      const SlamOutput out = run_slam(incs, cfg);
      write_file(slam_out, [&](std::ostream& o) { write_trajectory(o, out.records); });
      if (!slam_mag.empty()) write_json(slam_mag, export_mag_map(out.best.mag_map, slam_full_cov));
      if (!slam_motion.empty()) {
        write_json(slam_motion, export_motion_map(out.best.motion_map, cfg.motion_grid));
      }
      if (!slam_truth.empty()) {
        const auto truth = ingest_truth(slam_truth);
        if (truth.size() != out.records.size() + 1 && truth.size() != out.records.size()) {
          throw std::runtime_error("truth has " + std::to_string(truth.size()) +
                                   " poses for " + std::to_string(out.records.size()) + " steps");
        }
        // Truth may include the start pose; compare the stepped poses only.
        const std::size_t off = truth.size() - out.records.size();
        std::vector<Pose> est, ref;
        for (std::size_t k = 0; k < out.records.size(); ++k) {
          est.push_back(out.records[k].pose);
          ref.push_back(truth[k + off].pose);
        }
        nlohmann::json rep = {{"rmse", to_json(rmse(est, ref))},
                              {"end_point_deviation", (est.back().p - ref.back().p).norm()},
                              {"filter", to_json(cfg)}};
        if (slam_report.empty()) {
          std::cout << rep.dump(2) << '\n';
        } else {
          write_json(slam_report, rep);
        }
      }
    } else if (sim->parsed()) {
      Scenario sc = scenario_by_name(sim_scenario);
      sim_drift.apply(sc);
      const World world(sc.world);
      const auto truth = gen_truth(sc.trajectory);
      std::mt19937_64 rng(sim_seed);
      const auto incs = corrupt(truth, sc.drift, world, sc.mag_noise, rng,
                                sc.trajectory.stride_period);
      fs::create_directories(sim_dir);
      std::vector<TimedPose> timed;
      for (std::size_t k = 0; k < truth.size(); ++k) {
        timed.push_back({static_cast<double>(k) * sc.trajectory.stride_period, truth[k]});
      }
      write_file(fs::path(sim_dir) / "truth.csv", [&](std::ostream& o) { write_truth(o, timed); });
      write_file(fs::path(sim_dir) / "increments.csv",
                 [&](std::ostream& o) { write_increments(o, incs); });
      write_json(fs::path(sim_dir) / "scenario.json", to_json(sc));
      if (sim_imu || sim_noiseless) {
        ImuNoiseSpec noise = sim_noiseless ? ImuNoiseSpec{} : mti100_noise();
        noise.seed = sim_seed;
        const auto log = synth_imu(truth, noise, GaitSpec{}, &world);
        write_file(fs::path(sim_dir) / "imu.csv", [&](std::ostream& o) { write_imu(o, log); });
      }
      std::cerr << incs.size() << " strides written to " << sim_dir << '\n';
    } else if (bench->parsed()) {
      bench_cfg.scenario = scenario_by_name(bench_scenario);
      bench_drift.apply(bench_cfg.scenario);
      bench_cfg.filter = bench_flags.resolve();
      bench_cfg.ablations = !bench_no_ablations;
      const std::string text = report_text(run_benchmark(bench_cfg));
      if (bench_out.empty()) {
        std::cout << text;
      } else {
        write_file(bench_out, [&](std::ostream& o) { o << text; });
      }
    } else if (heat->parsed()) {
      if (heat_scenario.empty() == heat_map.empty()) {
        throw CLI::ValidationError("export-heatmap", "give exactly one of --scenario and --map");
      }
      std::vector<HeatmapCell> cells;
      if (!heat_scenario.empty()) {
        const Scenario sc = scenario_by_name(heat_scenario);
        grid.x_min = x_min.value_or(sc.world.extent_min.x());
        grid.x_max = x_max.value_or(sc.world.extent_max.x());
        grid.y_min = y_min.value_or(sc.world.extent_min.y());
        grid.y_max = y_max.value_or(sc.world.extent_max.y());
        cells = export_heatmap(World(sc.world), grid);
      } else {
        const MagMap map = import_mag_map(read_json(heat_map));
        Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
        map.for_each([&](const MagTile& t) {
          lo = lo.cwiseMin(t.center - t.half_lengths());
          hi = hi.cwiseMax(t.center + t.half_lengths());
        });
        grid.x_min = x_min.value_or(lo.x());
        grid.x_max = x_max.value_or(hi.x());
        grid.y_min = y_min.value_or(lo.y());
        grid.y_max = y_max.value_or(hi.y());
        cells = export_heatmap(map, grid);
      }
      write_file(heat_out, [&](std::ostream& o) { write_heatmap(o, cells); });
      std::cerr << cells.size() << " cells\n";
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "pmslam: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
