#pragma once
#include <filesystem>
#include <span>
#include <vector>

#include "owmon/experiment.hpp"
#include "owmon/geom.hpp"

namespace owmon {

/// Per-size sweep summary. Header:
/// array_n,trials,mse_m2,miss_rate,false_peak_rate,anomaly_precision,anomaly_recall,runtime_ms
/// The runtime_ms column is written as 0; wall-clock timings are
/// nondeterministic and live in the sidecar run.log instead.
void write_sweep_csv(const ExperimentReport& report,
                     const std::filesystem::path& path);

/// Per-trial audit rows.
void write_trials_csv(const ExperimentReport& report,
                      const std::filesystem::path& path);

/// Anomaly report rows: trial,est_x_m,est_y_m,matched_claim_id,anomaly.
void write_anomaly_csv(std::span<const GroundEstimate> estimates,
                       long trial, const std::filesystem::path& path);

/// Log-y line chart of MSE versus array side length (SVG).
void write_mse_plot_svg(const ExperimentReport& report,
                        const std::filesystem::path& path);

/// Frame heatmap with ground-truth circles and estimate crosses (SVG).
void write_frame_overlay_svg(const Frame& frame,
                             std::span<const Vec2> truth_sensor_points,
                             std::span<const Vec2> estimate_sensor_points,
                             const std::filesystem::path& path);

/// Nondeterministic run details: timings, failures, gate radii.
void write_run_log(const ExperimentReport& report,
                   const std::filesystem::path& path);

}  // namespace owmon
