#pragma once
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "owmon/assign.hpp"
#include "owmon/detect.hpp"
#include "owmon/optics.hpp"
#include "owmon/sensor.hpp"

namespace owmon {

/// Raised for malformed config text or invariant violations; the message
/// carries the offending line number or key.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Full experiment description. Zero values in the fields marked "0 = auto"
/// are resolved from the optics during resolve_and_validate().
struct ExperimentConfig {
  TurbulenceParams turbulence;
  LensConfig lens;
  SceneConfig scene;  // includes the shared beam parameters

  int sensor_nx = 64;
  int sensor_ny = 64;
  double sensor_width = 0.03;
  double sensor_height = 0.03;
  double sensor_plane_z = 0.0;  // 0 = focal length

  AcquisitionConfig acquisition;
  RenderOptions render;

  double detector_sigma_tgt = 0.0;     // 0 = sigma_eff
  double detector_nms_radius = 0.0;    // 0 = 2 sigma_eff
  double detector_peak_threshold = 0.25;
  double detector_window_radius = 0.0;  // 0 = 3 sigma_eff
  bool detector_known_count = false;    // use the true count at inference

  CostMetric metric = CostMetric::euclidean;
  double assign_cmax = 0.0;   // 0 = 3 * nms_radius
  double anomaly_gate = 0.0;  // 0 = auto: max(2 m, 3 sqrt(MSE))

  int trials = 2000;
  std::vector<int> array_sizes = {10, 20, 40, 60, 80, 100};
  std::uint64_t master_seed = 1;
  std::string out_dir = "out";
  int threads = 0;  // 0 = hardware concurrency
  double max_failure_rate = 0.01;
  bool emit_frames = false;
  bool emit_trials = true;
  int calibration_frames = 2000;

  /// Effective spot std at the configured sensor plane.
  double sigma_eff() const;

  /// Centered square sensor for one sweep array size.
  SensorConfig sensor_for_size(int n) const;
  /// Centered sensor at the configured nx x ny resolution.
  SensorConfig sensor() const;

  /// Detector settings after auto-resolution. The refinement window is
  /// clamped per grid so it always spans at least one pixel.
  DetectorConfig detector(const SensorConfig& grid) const;

  double cmax() const { return assign_cmax; }
};

/// Parses flat `key = value` text (one pair per line, '#' comments, lists
/// comma-separated). Unknown or duplicate keys and malformed lines raise
/// ConfigError with the line number. Missing keys keep their defaults.
/// The result is resolved and validated.
ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig parse_config(const std::filesystem::path& path);

/// Like parse_config_text but leaves auto fields unresolved, so callers can
/// layer overrides before resolve_and_validate().
ExperimentConfig parse_config_text_raw(std::string_view text);
ExperimentConfig parse_config_raw(const std::filesystem::path& path);

/// Fills every "0 = auto" field and checks all invariants; errors name the
/// offending key.
void resolve_and_validate(ExperimentConfig& cfg);

/// Canonical serialization: every key, fixed order, shortest round-trip
/// number format. parse(serialize(cfg)) == cfg byte-stably.
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace owmon
