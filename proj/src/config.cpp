#include "owmon/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "owmon/text.hpp"

namespace owmon {

namespace {

[[noreturn]] void fail_key(const std::string& key, const std::string& what) {
  throw ConfigError("config validation failed: " + key + " " + what);
}

void check(bool ok, const std::string& key, const std::string& what) {
  if (!ok) fail_key(key, what);
}

double parse_double(const std::string& value, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line) + ": not a number '" +
                      value + "'");
  }
}

long parse_long(const std::string& value, int line) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line) + ": not an integer '" +
                      value + "'");
  }
}

std::uint64_t parse_u64(const std::string& value, int line) {
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line) +
                      ": not an unsigned integer '" + value + "'");
  }
}

bool parse_bool(const std::string& value, int line) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError("line " + std::to_string(line) +
                    ": expected true or false, got '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& value, int line) {
  std::vector<int> out;
  for (const std::string& item : split(value, ','))
    out.push_back(static_cast<int>(parse_long(item, line)));
  return out;
}

std::string int_list_to_string(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[static_cast<std::size_t>(i)]);
  }
  return out;
}

/// Applies one key. Returns false for unknown keys.
bool apply_key(ExperimentConfig& c, const std::string& key,
               const std::string& value, int line) {
  auto d = [&] { return parse_double(value, line); };
  auto i = [&] { return static_cast<int>(parse_long(value, line)); };
  auto b = [&] { return parse_bool(value, line); };

  if (key == "turbulence.alpha") c.turbulence.alpha = d();
  else if (key == "turbulence.beta") c.turbulence.beta = d();
  else if (key == "lens.radius_m") c.lens.radius_ra = d();
  else if (key == "lens.transmission") c.lens.transmission_tau = d();
  else if (key == "lens.focal_length_m") c.lens.focal_length_f = d();
  else if (key == "lens.sensor_efficiency") c.lens.sensor_efficiency_eta_s = d();
  else if (key == "lens.sigma_diff0_m") c.lens.sigma_diff0 = d();
  else if (key == "lens.sigma_sens_m") c.lens.sigma_sens = d();
  else if (key == "beam.power_w") c.scene.beam.tx_power = d();
  else if (key == "beam.radius_wz_m") c.scene.beam.beam_radius_wz = d();
  else if (key == "beam.jitter_mean_m") c.scene.beam.jitter_mu = d();
  else if (key == "beam.jitter_sigma_m") c.scene.beam.jitter_sigma = d();
  else if (key == "beam.attenuation_per_m") c.scene.beam.attenuation_kappa = d();
  else if (key == "scene.altitude_m") c.scene.uav_altitude = d();
  else if (key == "scene.area_half_width_x_m") c.scene.area_half_widths.x = d();
  else if (key == "scene.area_half_width_y_m") c.scene.area_half_widths.y = d();
  else if (key == "scene.count_choices") c.scene.count_choices = parse_int_list(value, line);
  else if (key == "scene.eavesdropper_fraction") c.scene.eavesdropper_fraction = d();
  else if (key == "scene.eavesdropper_count") c.scene.eavesdropper_count = i();
  else if (key == "scene.min_separation_m") c.scene.min_separation = d();
  else if (key == "scene.claimed_noise_sigma_m") c.scene.claimed_noise_sigma = d();
  else if (key == "sensor.nx") c.sensor_nx = i();
  else if (key == "sensor.ny") c.sensor_ny = i();
  else if (key == "sensor.width_m") c.sensor_width = d();
  else if (key == "sensor.height_m") c.sensor_height = d();
  else if (key == "sensor.plane_z_m") c.sensor_plane_z = d();
  else if (key == "acquisition.t_int_s") c.acquisition.t_int = d();
  else if (key == "acquisition.t_coh_s") c.acquisition.t_coh = d();
  else if (key == "acquisition.noise_n0") c.acquisition.noise_n0 = d();
  else if (key == "acquisition.noise_scale") c.acquisition.noise_scale = d();
  else if (key == "render.turbulence") c.render.turbulence = b();
  else if (key == "render.jitter") c.render.jitter = b();
  else if (key == "render.noise") c.render.noise = b();
  else if (key == "render.constant_jitter") c.render.jitter_constant_over_frame = b();
  else if (key == "detector.sigma_tgt_m") c.detector_sigma_tgt = d();
  else if (key == "detector.nms_radius_m") c.detector_nms_radius = d();
  else if (key == "detector.peak_threshold") c.detector_peak_threshold = d();
  else if (key == "detector.window_radius_m") c.detector_window_radius = d();
  else if (key == "detector.known_count") c.detector_known_count = b();
  else if (key == "assign.metric") {
    if (value == "euclidean") c.metric = CostMetric::euclidean;
    else if (value == "mahalanobis") c.metric = CostMetric::mahalanobis;
    else
      throw ConfigError("line " + std::to_string(line) +
                        ": assign.metric must be euclidean or mahalanobis");
  }
  else if (key == "assign.cmax_m") c.assign_cmax = d();
  else if (key == "anomaly.gate_radius_m") c.anomaly_gate = d();
  else if (key == "run.trials") c.trials = i();
  else if (key == "run.array_sizes") c.array_sizes = parse_int_list(value, line);
  else if (key == "run.seed") c.master_seed = parse_u64(value, line);
  else if (key == "run.out_dir") c.out_dir = value;
  else if (key == "run.threads") c.threads = i();
  else if (key == "run.max_failure_rate") c.max_failure_rate = d();
  else if (key == "run.emit_frames") c.emit_frames = b();
  else if (key == "run.emit_trials") c.emit_trials = b();
  else if (key == "run.calibration_frames") c.calibration_frames = i();
  else return false;
  return true;
}

}  // namespace

double ExperimentConfig::sigma_eff() const {
  const double z = sensor_plane_z > 0.0 ? sensor_plane_z : lens.focal_length_f;
  return blur_sigma_eff(lens, z).sigma_eff;
}

SensorConfig ExperimentConfig::sensor_for_size(int n) const {
  return SensorConfig::centered(n, n, sensor_width, sensor_height,
                                sensor_plane_z > 0.0 ? sensor_plane_z
                                                     : lens.focal_length_f);
}

SensorConfig ExperimentConfig::sensor() const {
  return SensorConfig::centered(sensor_nx, sensor_ny, sensor_width,
                                sensor_height,
                                sensor_plane_z > 0.0 ? sensor_plane_z
                                                     : lens.focal_length_f);
}

DetectorConfig ExperimentConfig::detector(const SensorConfig& grid) const {
  DetectorConfig det;
  const double sigma = sigma_eff();
  det.sigma_tgt = detector_sigma_tgt > 0.0 ? detector_sigma_tgt : sigma;
  det.nms_radius = detector_nms_radius > 0.0 ? detector_nms_radius : 2.0 * sigma;
  det.peak_threshold = detector_peak_threshold;
  const double window =
      detector_window_radius > 0.0 ? detector_window_radius : 3.0 * sigma;
  // The refinement window must span at least one pixel on this grid.
  det.window_radius = std::max(window, std::max(grid.pitch_x, grid.pitch_y));
  return det;
}

ExperimentConfig parse_config_text_raw(std::string_view text) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view raw_line =
        end == std::string_view::npos ? text.substr(start)
                                      : text.substr(start, end - start);
    ++line_no;
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;

    const auto hash = raw_line.find('#');
    if (hash != std::string_view::npos) raw_line = raw_line.substr(0, hash);
    const std::string_view line = trim(raw_line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key{trim(line.substr(0, eq))};
    const std::string value{trim(line.substr(eq + 1))};
    if (key.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (!seen.insert(key).second)
      throw ConfigError("line " + std::to_string(line_no) +
                        ": duplicate key '" + key + "'");
    if (!apply_key(cfg, key, value, line_no))
      throw ConfigError("line " + std::to_string(line_no) +
                        ": unknown key '" + key + "'");
  }
  return cfg;
}

ExperimentConfig parse_config_text(std::string_view text) {
  ExperimentConfig cfg = parse_config_text_raw(text);
  resolve_and_validate(cfg);
  return cfg;
}

ExperimentConfig parse_config_raw(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file: " + path.string());
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return parse_config_text_raw(buffer.str());
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  ExperimentConfig cfg = parse_config_raw(path);
  resolve_and_validate(cfg);
  return cfg;
}

void resolve_and_validate(ExperimentConfig& c) {
  check(c.turbulence.alpha > 0.0, "turbulence.alpha", "must be > 0");
  check(c.turbulence.beta > 0.0, "turbulence.beta", "must be > 0");

  check(c.lens.radius_ra > 0.0, "lens.radius_m", "must be > 0");
  check(c.lens.transmission_tau > 0.0 && c.lens.transmission_tau <= 1.0,
        "lens.transmission", "must be in (0,1]");
  check(c.lens.focal_length_f > 0.0, "lens.focal_length_m", "must be > 0");
  check(c.lens.sensor_efficiency_eta_s > 0.0 &&
            c.lens.sensor_efficiency_eta_s <= 1.0,
        "lens.sensor_efficiency", "must be in (0,1]");
  check(c.lens.sigma_diff0 >= 0.0, "lens.sigma_diff0_m", "must be >= 0");
  check(c.lens.sigma_sens >= 0.0, "lens.sigma_sens_m", "must be >= 0");

  check(c.scene.beam.tx_power > 0.0, "beam.power_w", "must be > 0");
  check(c.scene.beam.beam_radius_wz > 0.0, "beam.radius_wz_m", "must be > 0");
  check(c.scene.beam.jitter_sigma >= 0.0, "beam.jitter_sigma_m", "must be >= 0");
  check(c.scene.beam.attenuation_kappa >= 0.0, "beam.attenuation_per_m",
        "must be >= 0");
  // Flat-field validity of the collected-power model.
  check(c.scene.beam.beam_radius_wz >= 5.0 * c.lens.radius_ra,
        "beam.radius_wz_m", "must be at least 5 lens radii (flat-field model)");

  check(!c.scene.count_choices.empty(), "scene.count_choices",
        "must not be empty");
  for (int n : c.scene.count_choices)
    check(n >= 1, "scene.count_choices", "entries must be >= 1");
  check(c.scene.eavesdropper_fraction >= 0.0 &&
            c.scene.eavesdropper_fraction <= 1.0,
        "scene.eavesdropper_fraction", "must be in [0,1]");
  if (c.scene.eavesdropper_count >= 0) {
    const int n_min = *std::min_element(c.scene.count_choices.begin(),
                                        c.scene.count_choices.end());
    check(c.scene.eavesdropper_count <= n_min, "scene.eavesdropper_count",
          "must not exceed the smallest transmitter count");
  }
  check(c.scene.min_separation >= 0.0, "scene.min_separation_m", "must be >= 0");
  check(c.scene.claimed_noise_sigma >= 0.0, "scene.claimed_noise_sigma_m",
        "must be >= 0");
  check(c.scene.area_half_widths.x > 0.0, "scene.area_half_width_x_m",
        "must be > 0");
  check(c.scene.area_half_widths.y > 0.0, "scene.area_half_width_y_m",
        "must be > 0");
  check(c.scene.uav_altitude > 0.0, "scene.altitude_m", "must be > 0");

  check(c.sensor_nx >= 1, "sensor.nx", "must be >= 1");
  check(c.sensor_ny >= 1, "sensor.ny", "must be >= 1");
  check(c.sensor_width > 0.0, "sensor.width_m", "must be > 0");
  check(c.sensor_height > 0.0, "sensor.height_m", "must be > 0");
  if (c.sensor_plane_z == 0.0) c.sensor_plane_z = c.lens.focal_length_f;
  check(c.sensor_plane_z > 0.0 && c.sensor_plane_z <= c.lens.focal_length_f,
        "sensor.plane_z_m", "must lie in (0, focal length]");

  check(c.acquisition.t_int > 0.0, "acquisition.t_int_s", "must be > 0");
  check(c.acquisition.t_coh > 0.0, "acquisition.t_coh_s", "must be > 0");
  check(c.acquisition.slots() >= 1, "acquisition.t_coh_s",
        "must allow at least one coherence slot per frame");
  check(c.acquisition.noise_n0 >= 0.0, "acquisition.noise_n0", "must be >= 0");
  check(c.acquisition.noise_scale >= 0.0, "acquisition.noise_scale",
        "must be >= 0");

  const double sigma = c.sigma_eff();
  if (c.detector_sigma_tgt == 0.0) {
    check(sigma > 0.0, "detector.sigma_tgt_m",
          "cannot derive from a zero optical blur; set it explicitly");
    c.detector_sigma_tgt = sigma;
  }
  check(c.detector_sigma_tgt > 0.0, "detector.sigma_tgt_m", "must be > 0");
  if (c.detector_nms_radius == 0.0) c.detector_nms_radius = 2.0 * sigma;
  check(c.detector_nms_radius > 0.0, "detector.nms_radius_m", "must be > 0");
  check(c.detector_peak_threshold > 0.0 && c.detector_peak_threshold < 1.0,
        "detector.peak_threshold", "must be in (0,1)");
  if (c.detector_window_radius == 0.0) c.detector_window_radius = 3.0 * sigma;
  check(c.detector_window_radius > 0.0, "detector.window_radius_m",
        "must be > 0");

  if (c.assign_cmax == 0.0) c.assign_cmax = 3.0 * c.detector_nms_radius;
  check(c.assign_cmax > 0.0, "assign.cmax_m", "must be > 0");
  check(c.anomaly_gate >= 0.0, "anomaly.gate_radius_m",
        "must be >= 0 (0 selects the automatic gate)");

  check(c.trials >= 1, "run.trials", "must be >= 1");
  check(!c.array_sizes.empty(), "run.array_sizes", "must not be empty");
  for (int n : c.array_sizes)
    check(n >= 2, "run.array_sizes", "entries must be >= 2");
  check(c.max_failure_rate >= 0.0 && c.max_failure_rate <= 1.0,
        "run.max_failure_rate", "must be in [0,1]");
  check(c.calibration_frames >= 100, "run.calibration_frames",
        "must be >= 100");
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  auto kv = [&os](const char* key, const std::string& value) {
    os << key << " = " << value << '\n';
  };
  auto kd = [&kv](const char* key, double v) { kv(key, format_double(v)); };
  auto ki = [&kv](const char* key, long v) { kv(key, std::to_string(v)); };
  auto kb = [&kv](const char* key, bool v) { kv(key, v ? "true" : "false"); };

  kd("turbulence.alpha", c.turbulence.alpha);
  kd("turbulence.beta", c.turbulence.beta);
  kd("lens.radius_m", c.lens.radius_ra);
  kd("lens.transmission", c.lens.transmission_tau);
  kd("lens.focal_length_m", c.lens.focal_length_f);
  kd("lens.sensor_efficiency", c.lens.sensor_efficiency_eta_s);
  kd("lens.sigma_diff0_m", c.lens.sigma_diff0);
  kd("lens.sigma_sens_m", c.lens.sigma_sens);
  kd("beam.power_w", c.scene.beam.tx_power);
  kd("beam.radius_wz_m", c.scene.beam.beam_radius_wz);
  kd("beam.jitter_mean_m", c.scene.beam.jitter_mu);
  kd("beam.jitter_sigma_m", c.scene.beam.jitter_sigma);
  kd("beam.attenuation_per_m", c.scene.beam.attenuation_kappa);
  kd("scene.altitude_m", c.scene.uav_altitude);
  kd("scene.area_half_width_x_m", c.scene.area_half_widths.x);
  kd("scene.area_half_width_y_m", c.scene.area_half_widths.y);
  kv("scene.count_choices", int_list_to_string(c.scene.count_choices));
  kd("scene.eavesdropper_fraction", c.scene.eavesdropper_fraction);
  ki("scene.eavesdropper_count", c.scene.eavesdropper_count);
  kd("scene.min_separation_m", c.scene.min_separation);
  kd("scene.claimed_noise_sigma_m", c.scene.claimed_noise_sigma);
  ki("sensor.nx", c.sensor_nx);
  ki("sensor.ny", c.sensor_ny);
  kd("sensor.width_m", c.sensor_width);
  kd("sensor.height_m", c.sensor_height);
  kd("sensor.plane_z_m", c.sensor_plane_z);
  kd("acquisition.t_int_s", c.acquisition.t_int);
  kd("acquisition.t_coh_s", c.acquisition.t_coh);
  kd("acquisition.noise_n0", c.acquisition.noise_n0);
  kd("acquisition.noise_scale", c.acquisition.noise_scale);
  kb("render.turbulence", c.render.turbulence);
  kb("render.jitter", c.render.jitter);
  kb("render.noise", c.render.noise);
  kb("render.constant_jitter", c.render.jitter_constant_over_frame);
  kd("detector.sigma_tgt_m", c.detector_sigma_tgt);
  kd("detector.nms_radius_m", c.detector_nms_radius);
  kd("detector.peak_threshold", c.detector_peak_threshold);
  kd("detector.window_radius_m", c.detector_window_radius);
  kb("detector.known_count", c.detector_known_count);
  kv("assign.metric",
     c.metric == CostMetric::euclidean ? "euclidean" : "mahalanobis");
  kd("assign.cmax_m", c.assign_cmax);
  kd("anomaly.gate_radius_m", c.anomaly_gate);
  ki("run.trials", c.trials);
  kv("run.array_sizes", int_list_to_string(c.array_sizes));
  kv("run.seed", std::to_string(c.master_seed));
  kv("run.out_dir", c.out_dir);
  ki("run.threads", c.threads);
  kd("run.max_failure_rate", c.max_failure_rate);
  kb("run.emit_frames", c.emit_frames);
  kb("run.emit_trials", c.emit_trials);
  ki("run.calibration_frames", c.calibration_frames);
  return os.str();
}

}  // namespace owmon
