#include "owmon/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "owmon/parallel.hpp"

namespace owmon {

namespace {

constexpr std::uint64_t kSweepStream = 0;
constexpr std::uint64_t kCalibTrainStream = 1;
constexpr std::uint64_t kCalibHeldoutStream = 2;

double auto_gate(double mse_m2) {
  return std::max(2.0, 3.0 * std::sqrt(std::max(0.0, mse_m2)));
}

/// Scores anomaly flags for one trial against the scene's ground truth.
void cross_check_anomalies(TrialOutcome& trial, const ExperimentConfig& cfg,
                           double gate) {
  std::vector<GroundEstimate> estimates;
  estimates.reserve(trial.est_positions.size());
  const double z = cfg.sensor_plane_z;
  for (const Vec2& p : trial.est_positions)
    estimates.push_back(
        ground_estimate_from_position(p, z, cfg.scene.uav_altitude));

  const AnomalyReport report =
      flag_anomalies(std::move(estimates), trial.claims, gate);

  trial.anomaly_tp = trial.anomaly_fp = trial.anomaly_fn = 0;
  std::vector<bool> eave_flagged(trial.truth_is_eave.size(), false);
  for (std::size_t e = 0; e < report.estimates.size(); ++e) {
    if (!report.estimates[e].anomaly) continue;
    const int truth = trial.est_truth_index[e];
    if (truth >= 0 && trial.truth_is_eave[static_cast<std::size_t>(truth)]) {
      ++trial.anomaly_tp;
      eave_flagged[static_cast<std::size_t>(truth)] = true;
    } else {
      ++trial.anomaly_fp;
    }
  }
  for (std::size_t t = 0; t < trial.truth_is_eave.size(); ++t) {
    if (trial.truth_is_eave[t] && !eave_flagged[t]) ++trial.anomaly_fn;
  }
}

}  // namespace

TrialOutcome run_trial(const ExperimentConfig& cfg, const SensorConfig& sensor,
                       std::uint64_t seed, const CalibrationModel* calibration,
                       const Scene* fixed_scene) {
  TrialOutcome out;
  out.array_n = sensor.nx;

  RngStream stream(seed);
  Scene generated;
  if (fixed_scene == nullptr) {
    generated = generate_scene(stream, cfg.scene);
    fixed_scene = &generated;
  }
  const Scene& scene = *fixed_scene;

  out.n_true = static_cast<int>(scene.transmitters.size());
  out.truth_is_eave.resize(scene.transmitters.size());
  out.truth_matched.assign(scene.transmitters.size(), false);
  for (std::size_t i = 0; i < scene.transmitters.size(); ++i) {
    const auto& tx = scene.transmitters[i];
    out.truth_is_eave[i] = !tx.legitimate;
    if (!tx.legitimate) ++out.n_eaves;
    if (tx.claimed_position)
      out.claims.push_back({static_cast<int>(i), *tx.claimed_position});
  }

  const Frame frame = render_frame(scene, cfg.turbulence, cfg.lens, sensor,
                                   cfg.acquisition, stream, cfg.render);

  DetectorConfig det = cfg.detector(sensor);
  if (cfg.detector_known_count) det.known_count = out.n_true;

  const Heatmap heat = matched_filter_heatmap(frame, det);
  SpotSet spots = nms_peaks(heat, det);
  spots = refine_subpixel(frame, spots, det.window_radius);
  if (calibration != nullptr) spots = apply_calibration(*calibration, spots);
  out.n_detected = static_cast<int>(spots.size());

  // True spot locations on the sensor plane.
  std::vector<Vec2> truth_points;
  truth_points.reserve(scene.transmitters.size());
  for (const auto& tx : scene.transmitters) {
    const auto link = LinkGeometry::from_ground(tx.true_position, scene.uav_altitude);
    truth_points.push_back(angle_to_sensor(link.angles, sensor.plane_z));
  }

  out.est_positions.reserve(spots.size());
  out.est_truth_index.assign(spots.size(), -1);
  for (const Vec2& c : spots.centroids)
    out.est_positions.push_back(
        ground_estimate_from_centroid(c, sensor.plane_z, scene.uav_altitude)
            .position);

  if (spots.size() == 0) {
    out.misses = out.n_true;
    return out;
  }

  CostMatrix cost;
  if (cfg.metric == CostMetric::mahalanobis) {
    const double variance = cfg.sigma_eff() * cfg.sigma_eff();
    std::vector<Cov2> covariances(truth_points.size(),
                                  Cov2::isotropic(variance));
    cost = mahalanobis_cost(truth_points, spots.centroids, covariances);
  } else {
    cost = euclidean_cost(truth_points, spots.centroids);
  }
  double cmax = cfg.cmax();
  if (cfg.metric == CostMetric::mahalanobis) cmax /= cfg.sigma_eff();
  const AssignmentResult assignment = solve_lap_rect(cost, cmax);

  for (const auto& [ti, ei] : assignment.pairs) {
    out.truth_matched[static_cast<std::size_t>(ti)] = true;
    out.est_truth_index[static_cast<std::size_t>(ei)] = ti;
    const Vec2 err = out.est_positions[static_cast<std::size_t>(ei)] -
                     scene.transmitters[static_cast<std::size_t>(ti)].true_position;
    out.sum_sq_err_m2 += err.norm2();
    ++out.matched;
  }
  out.misses = static_cast<int>(assignment.unassigned_refs.size());
  out.false_peaks = static_cast<int>(assignment.unassigned_dets.size());
  return out;
}

ExperimentReport run_sweep(const ExperimentConfig& cfg,
                           const CalibrationModel* calibration) {
  ExperimentReport report;
  const std::size_t trials = static_cast<std::size_t>(cfg.trials);

  for (std::size_t si = 0; si < cfg.array_sizes.size(); ++si) {
    const int n = cfg.array_sizes[si];
    const SensorConfig sensor = cfg.sensor_for_size(n);

    std::vector<TrialOutcome> outcomes(trials);
    parallel_for_index(trials, cfg.threads, [&](std::size_t ti) {
      const auto start = std::chrono::steady_clock::now();
      const std::uint64_t seed =
          derive_seed(cfg.master_seed, {kSweepStream, si, ti});
      try {
        outcomes[ti] = run_trial(cfg, sensor, seed, calibration);
      } catch (const std::exception& e) {
        outcomes[ti] = TrialOutcome{};
        outcomes[ti].array_n = n;
        outcomes[ti].failed = true;
        outcomes[ti].error = e.what();
      }
      outcomes[ti].trial_index = ti;
      outcomes[ti].runtime_ms =
          std::chrono::duration<double, std::milli>(
              std::chrono::steady_clock::now() - start)
              .count();
    });

    // Deterministic reduction in trial order.
    SizeSummary summary;
    summary.array_n = n;
    summary.trials = static_cast<int>(trials);
    long matched = 0, truths = 0, detections = 0, misses = 0, false_peaks = 0;
    double sum_sq = 0.0, runtime = 0.0;
    for (const TrialOutcome& t : outcomes) {
      runtime += t.runtime_ms;
      if (t.failed) {
        ++summary.failures;
        continue;
      }
      matched += t.matched;
      truths += t.n_true;
      detections += t.n_detected;
      misses += t.misses;
      false_peaks += t.false_peaks;
      sum_sq += t.sum_sq_err_m2;
    }
    summary.mse_m2 = matched > 0 ? sum_sq / static_cast<double>(matched) : 0.0;
    summary.miss_rate =
        truths > 0 ? static_cast<double>(misses) / static_cast<double>(truths)
                   : 0.0;
    summary.false_peak_rate =
        detections > 0
            ? static_cast<double>(false_peaks) / static_cast<double>(detections)
            : 0.0;
    summary.mean_runtime_ms = runtime / static_cast<double>(trials);

    // Anomaly cross-check with the gate of this operating point.
    summary.gate_radius_m =
        cfg.anomaly_gate > 0.0 ? cfg.anomaly_gate : auto_gate(summary.mse_m2);
    long tp = 0, fp = 0, fn = 0;
    for (TrialOutcome& t : outcomes) {
      if (t.failed) continue;
      cross_check_anomalies(t, cfg, summary.gate_radius_m);
      tp += t.anomaly_tp;
      fp += t.anomaly_fp;
      fn += t.anomaly_fn;
    }
    summary.anomaly_precision =
        (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp)
                      : 1.0;
    summary.anomaly_recall =
        (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn)
                      : 1.0;

    report.sizes.push_back(summary);
    for (TrialOutcome& t : outcomes) report.trials.push_back(std::move(t));
  }
  return report;
}

CalibrationRunResult run_calibration(const ExperimentConfig& cfg,
                                     int training_frames) {
  if (training_frames < 100)
    throw std::invalid_argument("calibration needs at least 100 training frames");

  const SensorConfig sensor = cfg.sensor();

  // Training pass: collect (raw centroid, true sensor point) pairs from the
  // uncalibrated detector, associated by the gated assignment.
  std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(training_frames));
  std::vector<std::vector<std::pair<Vec2, Vec2>>> per_trial_pairs(
      static_cast<std::size_t>(training_frames));
  parallel_for_index(
      static_cast<std::size_t>(training_frames), cfg.threads,
      [&](std::size_t i) {
        const std::uint64_t seed =
            derive_seed(cfg.master_seed, {kCalibTrainStream, i});
        RngStream stream(seed);
        const Scene scene = generate_scene(stream, cfg.scene);
        const Frame frame = render_frame(scene, cfg.turbulence, cfg.lens,
                                         sensor, cfg.acquisition, stream,
                                         cfg.render);
        DetectorConfig det = cfg.detector(sensor);
        if (cfg.detector_known_count)
          det.known_count = static_cast<int>(scene.transmitters.size());
        const Heatmap heat = matched_filter_heatmap(frame, det);
        SpotSet spots = nms_peaks(heat, det);
        spots = refine_subpixel(frame, spots, det.window_radius);
        if (spots.size() == 0) return;

        std::vector<Vec2> truth_points;
        for (const auto& tx : scene.transmitters) {
          const auto link =
              LinkGeometry::from_ground(tx.true_position, scene.uav_altitude);
          truth_points.push_back(angle_to_sensor(link.angles, sensor.plane_z));
        }
        const CostMatrix cost = euclidean_cost(truth_points, spots.centroids);
        const AssignmentResult assignment = solve_lap_rect(cost, cfg.cmax());
        for (const auto& [ti, ei] : assignment.pairs)
          per_trial_pairs[i].emplace_back(
              spots.centroids[static_cast<std::size_t>(ei)],
              truth_points[static_cast<std::size_t>(ti)]);
      });

  std::vector<std::pair<Vec2, Vec2>> pairs;
  for (const auto& chunk : per_trial_pairs)
    pairs.insert(pairs.end(), chunk.begin(), chunk.end());

  CalibrationRunResult result;
  result.training_pairs = static_cast<int>(pairs.size());
  result.model = fit_calibration(pairs);

  // Held-out evaluation: same distribution, fresh streams, both variants on
  // identical frames.
  const int heldout = std::max(50, training_frames / 4);
  result.heldout_scenes = heldout;
  std::vector<double> sq_raw(static_cast<std::size_t>(heldout), 0.0);
  std::vector<double> sq_cal(static_cast<std::size_t>(heldout), 0.0);
  std::vector<long> n_raw(static_cast<std::size_t>(heldout), 0);
  std::vector<long> n_cal(static_cast<std::size_t>(heldout), 0);
  parallel_for_index(
      static_cast<std::size_t>(heldout), cfg.threads, [&](std::size_t i) {
        const std::uint64_t seed =
            derive_seed(cfg.master_seed, {kCalibHeldoutStream, i});
        const TrialOutcome raw = run_trial(cfg, sensor, seed, nullptr);
        const TrialOutcome cal = run_trial(cfg, sensor, seed, &result.model);
        sq_raw[i] = raw.sum_sq_err_m2;
        n_raw[i] = raw.matched;
        sq_cal[i] = cal.sum_sq_err_m2;
        n_cal[i] = cal.matched;
      });

  double sum_raw = 0.0, sum_cal = 0.0;
  long matched_raw = 0, matched_cal = 0;
  for (int i = 0; i < heldout; ++i) {
    sum_raw += sq_raw[static_cast<std::size_t>(i)];
    sum_cal += sq_cal[static_cast<std::size_t>(i)];
    matched_raw += n_raw[static_cast<std::size_t>(i)];
    matched_cal += n_cal[static_cast<std::size_t>(i)];
  }
  result.mse_uncalibrated_m2 =
      matched_raw > 0 ? sum_raw / static_cast<double>(matched_raw) : 0.0;
  result.mse_calibrated_m2 =
      matched_cal > 0 ? sum_cal / static_cast<double>(matched_cal) : 0.0;
  return result;
}

}  // namespace owmon
