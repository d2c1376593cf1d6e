#pragma once
#include <array>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "owmon/sensor.hpp"
#include "owmon/vec.hpp"

namespace owmon {

/// Spot detector tuning. The blur-derived defaults come from for_blur().
struct DetectorConfig {
  double sigma_tgt = 0.008;     // heatmap kernel std [m]
  double nms_radius = 0.016;    // peak separation floor [m]
  double peak_threshold = 0.25;  // fraction of the heatmap max, in (0,1)
  std::optional<int> known_count;
  double window_radius = 0.024;  // centroid refinement half-window [m]

  /// sigma_tgt = sigma_eff, nms_radius = 2 sigma_eff, window = 3 sigma_eff.
  static DetectorConfig for_blur(double sigma_eff);

  void validate() const;
};

/// Single-channel detection heatmap sampled at pixel centers, values in [0,1].
struct Heatmap {
  SensorConfig grid;
  std::vector<double> values;

  double& at(int m, int n) { return values[static_cast<std::size_t>(n) * grid.nx + m]; }
  double at(int m, int n) const { return values[static_cast<std::size_t>(n) * grid.nx + m]; }
  double max_value() const;
};

/// Unordered detected centroids with confidences. Covariances are optional
/// (empty when unset). `clipped[i]` marks spots whose refinement window fell
/// entirely off the sensor and were passed through unchanged.
struct SpotSet {
  std::vector<Vec2> centroids;
  std::vector<double> scores;
  std::vector<Cov2> covariances;
  std::vector<bool> clipped;
  bool shortfall = false;  // fewer separated maxima than requested

  std::size_t size() const { return centroids.size(); }
};

/// Ground-truth-style heatmap: clipped superposition of unit-peak Gaussians
/// at the given centroids. Permutation-invariant in the centroid order.
Heatmap build_target_heatmap(const std::vector<Vec2>& centroids,
                             const DetectorConfig& cfg,
                             const SensorConfig& grid);

/// Model-based heatmap: median-subtracted normalized cross-correlation of
/// the frame with a unit-energy Gaussian kernel of std sigma_tgt, rescaled
/// to [0,1] by its maximum. An all-zero frame yields an all-zero heatmap.
Heatmap matched_filter_heatmap(const Frame& frame, const DetectorConfig& cfg);

/// Greedy non-maximum suppression over grid-local maxima. Retained peaks are
/// pairwise separated by at least nms_radius. With known_count set, exactly
/// that many separated peaks are returned when available (threshold ignored);
/// otherwise all peaks above peak_threshold * max.
SpotSet nms_peaks(const Heatmap& heatmap, const DetectorConfig& cfg);

/// Replaces each centroid with the background-subtracted intensity centroid
/// of the frame pixels inside a square window of the given half-width.
SpotSet refine_subpixel(const Frame& frame, const SpotSet& peaks,
                        double window_radius);

/// Number of NMS peaks above the score threshold.
int estimate_count(const Heatmap& heatmap, const DetectorConfig& cfg);

/// Per-axis cubic polynomial correction of raw centroids. Term order:
/// 1, x, y, x^2, xy, y^2, x^3, x^2 y, x y^2, y^3.
struct CalibrationModel {
  static constexpr int kTerms = 10;
  std::array<double, kTerms> coef_x{};
  std::array<double, kTerms> coef_y{};
  double residual_rms_x = 0.0;
  double residual_rms_y = 0.0;

  static CalibrationModel identity();
  Vec2 apply(Vec2 raw) const;
};

/// Least-squares fit of the correction polynomial on (raw, truth) pairs.
/// Requires at least 10x more samples than coefficients and a full-rank
/// design (throws otherwise).
CalibrationModel fit_calibration(
    const std::vector<std::pair<Vec2, Vec2>>& raw_truth_pairs);

/// Applies the polynomial to every centroid; scores and covariances carry over.
SpotSet apply_calibration(const CalibrationModel& model, const SpotSet& spots);

/// CSV form: header `term,coef_x,coef_y`, one row per polynomial term.
void save_calibration(const CalibrationModel& model,
                      const std::filesystem::path& path);
CalibrationModel load_calibration(const std::filesystem::path& path);

}  // namespace owmon
