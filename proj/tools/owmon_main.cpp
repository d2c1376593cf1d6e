// Command-line front end: single-scene simulation, the Monte Carlo sweep over
// array sizes, detector calibration, and bulk dataset export.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "owmon/config.hpp"
#include "owmon/experiment.hpp"
#include "owmon/outputs.hpp"
#include "owmon/text.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

namespace fs = std::filesystem;
using namespace owmon;

struct CliOverrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<std::vector<int>> array_sizes;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
  bool emit_frames = false;
  bool known_count = false;
  bool estimate_count = false;
  std::optional<std::string> metric;
};

ExperimentConfig load_config(const CliOverrides& cli) {
  ExperimentConfig cfg;
  if (!cli.config_path.empty()) cfg = parse_config_raw(cli.config_path);
  if (cli.seed) cfg.master_seed = *cli.seed;
  if (cli.trials) cfg.trials = *cli.trials;
  if (cli.array_sizes) cfg.array_sizes = *cli.array_sizes;
  if (cli.out_dir) cfg.out_dir = *cli.out_dir;
  if (cli.threads) cfg.threads = *cli.threads;
  if (cli.emit_frames) cfg.emit_frames = true;
  if (cli.known_count) cfg.detector_known_count = true;
  if (cli.estimate_count) cfg.detector_known_count = false;
  if (cli.metric)
    cfg.metric = *cli.metric == "mahalanobis" ? CostMetric::mahalanobis
                                              : CostMetric::euclidean;
  resolve_and_validate(cfg);
  return cfg;
}

void dump_config(const ExperimentConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream os(dir / "config.cfg");
  os << serialize_config(cfg);
}

int cmd_simulate(const ExperimentConfig& cfg) {
  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  dump_config(cfg, dir);

  const SensorConfig sensor = cfg.sensor();
  const std::uint64_t seed = derive_seed(cfg.master_seed, {0, 0, 0});
  const TrialOutcome trial = run_trial(cfg, sensor, seed, nullptr);

  // Re-render the same scene for the artifact dumps.
  RngStream stream(seed);
  const Scene scene = generate_scene(stream, cfg.scene);
  const Frame frame = render_frame(scene, cfg.turbulence, cfg.lens, sensor,
                                   cfg.acquisition, stream, cfg.render);
  write_frame(frame, dir / "frame.owfr");

  std::vector<Vec2> truth_pts, est_pts;
  for (const auto& tx : scene.transmitters) {
    const auto link = LinkGeometry::from_ground(tx.true_position, scene.uav_altitude);
    truth_pts.push_back(angle_to_sensor(link.angles, sensor.plane_z));
  }
  for (const Vec2& g : trial.est_positions)
    est_pts.push_back(ground_estimate_from_position(g, sensor.plane_z,
                                                    scene.uav_altitude)
                          .source_centroid);
  write_frame_overlay_svg(frame, truth_pts, est_pts, dir / "overlay.svg");

  const double gate = cfg.anomaly_gate > 0.0 ? cfg.anomaly_gate : 2.0;
  std::vector<GroundEstimate> estimates;
  for (const Vec2& g : trial.est_positions)
    estimates.push_back(
        ground_estimate_from_position(g, sensor.plane_z, scene.uav_altitude));
  const AnomalyReport anomalies =
      flag_anomalies(std::move(estimates), trial.claims, gate);
  write_anomaly_csv(anomalies.estimates, 0, dir / "anomalies.csv");

  std::cout << "transmitters: " << trial.n_true
            << " (eavesdroppers: " << trial.n_eaves << ")\n"
            << "detections:   " << trial.n_detected
            << " (matched: " << trial.matched << ", misses: " << trial.misses
            << ")\n";
  if (const auto mse = trial.mse_m2())
    std::cout << "mse:          " << *mse << " m^2\n";
  int flagged = 0;
  for (const auto& e : anomalies.estimates) flagged += e.anomaly ? 1 : 0;
  std::cout << "anomalies:    " << flagged << " flagged (gate " << gate
            << " m)\n"
            << "outputs in    " << dir.string() << "\n";
  return kExitOk;
}

int cmd_sweep(const ExperimentConfig& cfg) {
  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  dump_config(cfg, dir);

  const ExperimentReport report = run_sweep(cfg);

  write_sweep_csv(report, dir / "sweep.csv");
  if (cfg.emit_trials) write_trials_csv(report, dir / "trials.csv");
  write_mse_plot_svg(report, dir / "mse_vs_array.svg");
  write_run_log(report, dir / "run.log");

  if (cfg.emit_frames) {
    for (const SizeSummary& s : report.sizes) {
      const SensorConfig sensor = cfg.sensor_for_size(s.array_n);
      const std::uint64_t seed = derive_seed(cfg.master_seed, {0, 0, 0});
      RngStream stream(seed);
      const Scene scene = generate_scene(stream, cfg.scene);
      const Frame frame = render_frame(scene, cfg.turbulence, cfg.lens, sensor,
                                       cfg.acquisition, stream, cfg.render);
      const TrialOutcome trial = run_trial(cfg, sensor, seed, nullptr);
      std::vector<Vec2> truth_pts, est_pts;
      for (const auto& tx : scene.transmitters) {
        const auto link =
            LinkGeometry::from_ground(tx.true_position, scene.uav_altitude);
        truth_pts.push_back(angle_to_sensor(link.angles, sensor.plane_z));
      }
      for (const Vec2& g : trial.est_positions)
        est_pts.push_back(ground_estimate_from_position(g, sensor.plane_z,
                                                        scene.uav_altitude)
                              .source_centroid);
      char stem[32];
      std::snprintf(stem, sizeof(stem), "n%03d", s.array_n);
      write_frame(frame, dir / (std::string("frame_") + stem + ".owfr"));
      write_frame_overlay_svg(frame, truth_pts, est_pts,
                              dir / (std::string("overlay_") + stem + ".svg"));
    }
  }

  long failures = 0;
  for (const SizeSummary& s : report.sizes) failures += s.failures;
  std::cout << "array_n  mse_m2       miss   false  precision recall\n";
  for (const SizeSummary& s : report.sizes)
    std::printf("%5d    %-12.4g %-6.4f %-6.4f %-9.4f %-6.4f\n", s.array_n,
                s.mse_m2, s.miss_rate, s.false_peak_rate, s.anomaly_precision,
                s.anomaly_recall);
  std::cout << "outputs in " << dir.string() << "\n";

  const double failure_rate =
      static_cast<double>(failures) /
      std::max<long>(1, static_cast<long>(report.trials.size()));
  if (failure_rate > cfg.max_failure_rate) {
    std::cerr << "failure rate " << failure_rate << " exceeds threshold "
              << cfg.max_failure_rate << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_calibrate(const ExperimentConfig& cfg, int frames) {
  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  dump_config(cfg, dir);

  const CalibrationRunResult result = run_calibration(cfg, frames);
  save_calibration(result.model, dir / "calibration.csv");
  std::cout << "training pairs:    " << result.training_pairs << "\n"
            << "held-out scenes:   " << result.heldout_scenes << "\n"
            << "mse uncalibrated:  " << result.mse_uncalibrated_m2 << " m^2\n"
            << "mse calibrated:    " << result.mse_calibrated_m2 << " m^2\n"
            << "model written to   " << (dir / "calibration.csv").string()
            << "\n";
  return kExitOk;
}

int cmd_dataset(const ExperimentConfig& cfg, int count) {
  const DatasetResult result = export_dataset(
      count, cfg.scene, cfg.turbulence, cfg.lens, cfg.sensor(),
      cfg.acquisition, cfg.render, cfg.master_seed, cfg.out_dir, cfg.threads);
  dump_config(cfg, result.directory);
  std::cout << "wrote " << result.frame_count << " frames to "
            << result.directory.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Focal-plane monitoring simulator for outdoor optical access points"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  CliOverrides cli;
  app.add_option("--config", cli.config_path, "Experiment config file")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", cli.seed, "Master seed");
  app.add_option("--trials", cli.trials, "Trials per array size");
  app.add_option("--array-sizes", cli.array_sizes,
                 "Comma-separated array side lengths")
      ->delimiter(',');
  app.add_option("--out", cli.out_dir, "Output directory");
  app.add_option("--threads", cli.threads, "Worker threads (0 = auto)");
  app.add_flag("--emit-frames", cli.emit_frames, "Dump frames and overlays");
  app.add_option("--metric", cli.metric, "Assignment metric")
      ->check(CLI::IsMember({"euclidean", "mahalanobis"}));
  auto* known = app.add_flag("--known-count", cli.known_count,
                             "Detector uses the true transmitter count");
  app.add_flag("--estimate-count", cli.estimate_count,
               "Detector estimates the count from peaks")
      ->excludes(known);

  auto* simulate = app.add_subcommand("simulate", "Render and localize one scene");
  auto* sweep = app.add_subcommand("sweep", "MSE versus array size study");
  auto* calibrate = app.add_subcommand("calibrate", "Fit the centroid calibration");
  int calib_frames = 0;
  calibrate->add_option("--frames", calib_frames,
                        "Training frames (default from config)");
  auto* dataset = app.add_subcommand("dataset", "Bulk frame + truth export");
  int dataset_count = 100;
  dataset->add_option("--count", dataset_count, "Number of frames")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  ExperimentConfig cfg;
  try {
    cfg = load_config(cli);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(cfg);
    if (sweep->parsed()) return cmd_sweep(cfg);
    if (calibrate->parsed())
      return cmd_calibrate(cfg, calib_frames > 0 ? calib_frames
                                                 : cfg.calibration_frames);
    if (dataset->parsed()) return cmd_dataset(cfg, dataset_count);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
