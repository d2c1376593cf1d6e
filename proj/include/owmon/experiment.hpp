#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "owmon/config.hpp"
#include "owmon/detect.hpp"
#include "owmon/geom.hpp"
#include "owmon/sensor.hpp"

namespace owmon {

/// Everything one pipeline run produces that aggregation and the anomaly
/// cross-check need.
struct TrialOutcome {
  int array_n = 0;
  std::uint64_t trial_index = 0;
  int n_true = 0;
  int n_eaves = 0;
  int n_detected = 0;
  int matched = 0;
  int misses = 0;
  int false_peaks = 0;
  double sum_sq_err_m2 = 0.0;  // over matched pairs, ground meters squared

  std::vector<Vec2> est_positions;   // all detections, ground plane
  std::vector<int> est_truth_index;  // per detection; -1 when unmatched
  std::vector<bool> truth_is_eave;
  std::vector<bool> truth_matched;
  std::vector<Claim> claims;

  // Filled by the anomaly cross-check pass.
  int anomaly_tp = 0;
  int anomaly_fp = 0;
  int anomaly_fn = 0;

  bool failed = false;
  std::string error;
  double runtime_ms = 0.0;

  std::optional<double> mse_m2() const {
    if (matched == 0) return std::nullopt;
    return sum_sq_err_m2 / matched;
  }
};

/// Aggregates for one array size.
struct SizeSummary {
  int array_n = 0;
  int trials = 0;
  int failures = 0;
  double mse_m2 = 0.0;
  double miss_rate = 0.0;
  double false_peak_rate = 0.0;
  double anomaly_precision = 1.0;
  double anomaly_recall = 1.0;
  double gate_radius_m = 0.0;
  double mean_runtime_ms = 0.0;
};

struct ExperimentReport {
  std::vector<SizeSummary> sizes;
  std::vector<TrialOutcome> trials;  // ordered by (size, trial index)
};

/// One full pipeline pass: scene -> frame -> heatmap -> peaks -> refine ->
/// [calibrate] -> assign in the sensor plane -> invert -> score.
TrialOutcome run_trial(const ExperimentConfig& cfg, const SensorConfig& sensor,
                       std::uint64_t seed, const CalibrationModel* calibration,
                       const Scene* fixed_scene = nullptr);

/// Monte Carlo sweep over the configured array sizes. Trials execute on a
/// worker pool with per-trial streams derived from (seed, size, trial);
/// aggregation is a deterministic reduction in trial order. A failing trial
/// is counted and excluded without aborting the sweep.
ExperimentReport run_sweep(const ExperimentConfig& cfg,
                           const CalibrationModel* calibration = nullptr);

struct CalibrationRunResult {
  CalibrationModel model;
  int training_pairs = 0;
  int heldout_scenes = 0;
  double mse_uncalibrated_m2 = 0.0;
  double mse_calibrated_m2 = 0.0;
};

/// Fits the centroid-correction polynomial on simulated training frames and
/// scores it on a held-out set drawn from the same distribution.
CalibrationRunResult run_calibration(const ExperimentConfig& cfg,
                                     int training_frames);

}  // namespace owmon
