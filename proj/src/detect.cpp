#include "owmon/detect.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "owmon/text.hpp"

namespace owmon {

namespace {

const char* const kTermNames[CalibrationModel::kTerms] = {
    "1", "x", "y", "x2", "xy", "y2", "x3", "x2y", "xy2", "y3"};

std::array<double, CalibrationModel::kTerms> poly_terms(Vec2 p) {
  const double x = p.x, y = p.y;
  return {1.0, x, y, x * x, x * y, y * y, x * x * x, x * x * y, x * y * y,
          y * y * y};
}

double median_of(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  std::nth_element(values.begin(), values.begin() + mid - 1,
                   values.begin() + mid);
  return 0.5 * (hi + values[mid - 1]);
}

/// 1-D Gaussian correlation kernel with unit L2 norm.
std::vector<double> unit_energy_kernel(double sigma_px, int max_radius) {
  const int radius =
      std::min(max_radius, std::max(1, static_cast<int>(std::ceil(4.0 * sigma_px))));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double norm2 = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i / sigma_px) * (i / sigma_px));
    k[static_cast<std::size_t>(i + radius)] = v;
    norm2 += v * v;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& v : k) v *= inv;
  return k;
}

}  // namespace

DetectorConfig DetectorConfig::for_blur(double sigma_eff) {
  if (sigma_eff <= 0.0) throw std::invalid_argument("sigma_eff must be > 0");
  DetectorConfig cfg;
  cfg.sigma_tgt = sigma_eff;
  cfg.nms_radius = 2.0 * sigma_eff;
  cfg.window_radius = 3.0 * sigma_eff;
  return cfg;
}

void DetectorConfig::validate() const {
  if (sigma_tgt <= 0.0) throw std::invalid_argument("sigma_tgt must be > 0");
  if (nms_radius <= 0.0) throw std::invalid_argument("nms_radius must be > 0");
  if (peak_threshold <= 0.0 || peak_threshold >= 1.0)
    throw std::invalid_argument("peak_threshold must be in (0,1)");
  if (known_count && *known_count < 0)
    throw std::invalid_argument("known_count must be >= 0");
  if (window_radius <= 0.0)
    throw std::invalid_argument("window_radius must be > 0");
}

double Heatmap::max_value() const {
  return values.empty() ? 0.0
                        : *std::max_element(values.begin(), values.end());
}

Heatmap build_target_heatmap(const std::vector<Vec2>& centroids,
                             const DetectorConfig& cfg,
                             const SensorConfig& grid) {
  cfg.validate();
  grid.validate();
  Heatmap heat;
  heat.grid = grid;
  heat.values.assign(grid.pixel_count(), 0.0);

  const double inv_two_var = 1.0 / (2.0 * cfg.sigma_tgt * cfg.sigma_tgt);
  const double reach = 6.0 * cfg.sigma_tgt;
  for (const Vec2& c : centroids) {
    const int m_lo = std::max(
        0, static_cast<int>(std::floor((c.x - reach - grid.x_min) / grid.pitch_x)));
    const int m_hi = std::min(
        grid.nx - 1,
        static_cast<int>(std::floor((c.x + reach - grid.x_min) / grid.pitch_x)));
    const int n_lo = std::max(
        0, static_cast<int>(std::floor((c.y - reach - grid.y_min) / grid.pitch_y)));
    const int n_hi = std::min(
        grid.ny - 1,
        static_cast<int>(std::floor((c.y + reach - grid.y_min) / grid.pitch_y)));
    for (int n = n_lo; n <= n_hi; ++n) {
      for (int m = m_lo; m <= m_hi; ++m) {
        const Vec2 d = heat.grid.pixel_center(m, n) - c;
        heat.at(m, n) += std::exp(-d.norm2() * inv_two_var);
      }
    }
  }
  for (double& v : heat.values) v = std::min(1.0, v);
  return heat;
}

Heatmap matched_filter_heatmap(const Frame& frame, const DetectorConfig& cfg) {
  cfg.validate();
  const auto& grid = frame.sensor;
  const int nx = grid.nx, ny = grid.ny;

  std::vector<double> work(frame.pixels);
  const double background = median_of(work);
  for (std::size_t j = 0; j < work.size(); ++j)
    work[j] = frame.pixels[j] - background;

  // Separable correlation, zero padding outside the frame.
  const auto kx = unit_energy_kernel(cfg.sigma_tgt / grid.pitch_x, nx - 1 > 0 ? nx - 1 : 1);
  const auto ky = unit_energy_kernel(cfg.sigma_tgt / grid.pitch_y, ny - 1 > 0 ? ny - 1 : 1);
  const int rx = static_cast<int>(kx.size() / 2);
  const int ry = static_cast<int>(ky.size() / 2);

  std::vector<double> pass_x(work.size(), 0.0);
  for (int n = 0; n < ny; ++n) {
    const double* row = work.data() + static_cast<std::size_t>(n) * nx;
    double* out = pass_x.data() + static_cast<std::size_t>(n) * nx;
    for (int m = 0; m < nx; ++m) {
      double acc = 0.0;
      const int lo = std::max(-rx, -m);
      const int hi = std::min(rx, nx - 1 - m);
      for (int i = lo; i <= hi; ++i)
        acc += row[m + i] * kx[static_cast<std::size_t>(i + rx)];
      out[m] = acc;
    }
  }

  Heatmap heat;
  heat.grid = grid;
  heat.values.assign(work.size(), 0.0);
  for (int m = 0; m < nx; ++m) {
    for (int n = 0; n < ny; ++n) {
      double acc = 0.0;
      const int lo = std::max(-ry, -n);
      const int hi = std::min(ry, ny - 1 - n);
      for (int i = lo; i <= hi; ++i)
        acc += pass_x[static_cast<std::size_t>(n + i) * nx + m] *
               ky[static_cast<std::size_t>(i + ry)];
      heat.at(m, n) = std::max(0.0, acc);
    }
  }

  const double peak = heat.max_value();
  if (peak > 0.0) {
    const double inv = 1.0 / peak;
    for (double& v : heat.values) v *= inv;
  }
  return heat;
}

SpotSet nms_peaks(const Heatmap& heatmap, const DetectorConfig& cfg) {
  cfg.validate();
  const auto& grid = heatmap.grid;
  const int nx = grid.nx, ny = grid.ny;

  struct Candidate {
    double value;
    int m, n;
  };
  std::vector<Candidate> candidates;
  for (int n = 0; n < ny; ++n) {
    for (int m = 0; m < nx; ++m) {
      const double v = heatmap.at(m, n);
      // Flat-plateau tie break: a candidate must strictly dominate every
      // neighbor that precedes it in scan order, so a clipped plateau
      // contributes one candidate instead of its whole rim.
      bool is_max = v > 0.0;
      for (int dn = -1; dn <= 1 && is_max; ++dn) {
        for (int dm = -1; dm <= 1; ++dm) {
          if (dm == 0 && dn == 0) continue;
          const int mm = m + dm, nn = n + dn;
          if (mm < 0 || mm >= nx || nn < 0 || nn >= ny) continue;
          const double w = heatmap.at(mm, nn);
          const bool precedes = dn < 0 || (dn == 0 && dm < 0);
          if (w > v || (precedes && w == v)) { is_max = false; break; }
        }
      }
      if (is_max) candidates.push_back({v, m, n});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) {
                     return a.value > b.value;
                   });

  const double peak = heatmap.max_value();
  const double threshold = cfg.peak_threshold * peak;

  SpotSet spots;
  for (const Candidate& c : candidates) {
    if (cfg.known_count) {
      if (static_cast<int>(spots.size()) == *cfg.known_count) break;
    } else if (c.value < threshold) {
      break;
    }
    const Vec2 p = grid.pixel_center(c.m, c.n);
    bool separated = true;
    for (const Vec2& kept : spots.centroids) {
      if (distance(p, kept) < cfg.nms_radius) { separated = false; break; }
    }
    if (!separated) continue;
    spots.centroids.push_back(p);
    spots.scores.push_back(c.value);
    spots.clipped.push_back(false);
  }
  if (cfg.known_count && static_cast<int>(spots.size()) < *cfg.known_count)
    spots.shortfall = true;
  return spots;
}

SpotSet refine_subpixel(const Frame& frame, const SpotSet& peaks,
                        double window_radius) {
  const auto& grid = frame.sensor;
  if (window_radius < std::max(grid.pitch_x, grid.pitch_y))
    throw std::invalid_argument("refinement window must span at least one pixel");

  const double background = median_of(frame.pixels);
  SpotSet out = peaks;
  for (std::size_t s = 0; s < peaks.centroids.size(); ++s) {
    const Vec2 c = peaks.centroids[s];
    const int m_lo = std::max(
        0, static_cast<int>(std::ceil((c.x - window_radius - grid.x_min) / grid.pitch_x - 0.5)));
    const int m_hi = std::min(
        grid.nx - 1,
        static_cast<int>(std::floor((c.x + window_radius - grid.x_min) / grid.pitch_x - 0.5)));
    const int n_lo = std::max(
        0, static_cast<int>(std::ceil((c.y - window_radius - grid.y_min) / grid.pitch_y - 0.5)));
    const int n_hi = std::min(
        grid.ny - 1,
        static_cast<int>(std::floor((c.y + window_radius - grid.y_min) / grid.pitch_y - 0.5)));
    if (m_lo > m_hi || n_lo > n_hi) {
      out.clipped[s] = true;  // window entirely off-sensor; pass through
      continue;
    }
    double weight = 0.0;
    Vec2 first_moment{0.0, 0.0};
    for (int n = n_lo; n <= n_hi; ++n) {
      for (int m = m_lo; m <= m_hi; ++m) {
        const double w = std::max(0.0, frame.at(m, n) - background);
        if (w <= 0.0) continue;
        weight += w;
        first_moment = first_moment + w * grid.pixel_center(m, n);
      }
    }
    if (weight > 0.0) out.centroids[s] = first_moment / weight;
  }
  return out;
}

int estimate_count(const Heatmap& heatmap, const DetectorConfig& cfg) {
  DetectorConfig open = cfg;
  open.known_count.reset();
  return static_cast<int>(nms_peaks(heatmap, open).size());
}

CalibrationModel CalibrationModel::identity() {
  CalibrationModel m;
  m.coef_x[1] = 1.0;  // x term
  m.coef_y[2] = 1.0;  // y term
  return m;
}

Vec2 CalibrationModel::apply(Vec2 raw) const {
  const auto t = poly_terms(raw);
  Vec2 out{0.0, 0.0};
  for (int k = 0; k < kTerms; ++k) {
    out.x += coef_x[static_cast<std::size_t>(k)] * t[static_cast<std::size_t>(k)];
    out.y += coef_y[static_cast<std::size_t>(k)] * t[static_cast<std::size_t>(k)];
  }
  return out;
}

CalibrationModel fit_calibration(
    const std::vector<std::pair<Vec2, Vec2>>& raw_truth_pairs) {
  const int kMinSamples = 10 * CalibrationModel::kTerms;
  const auto count = static_cast<Eigen::Index>(raw_truth_pairs.size());
  if (count < kMinSamples)
    throw std::invalid_argument("calibration fit needs at least 100 samples");

  Eigen::MatrixXd design(count, CalibrationModel::kTerms);
  Eigen::VectorXd tx(count), ty(count);
  for (Eigen::Index r = 0; r < count; ++r) {
    const auto terms = poly_terms(raw_truth_pairs[static_cast<std::size_t>(r)].first);
    for (int k = 0; k < CalibrationModel::kTerms; ++k)
      design(r, k) = terms[static_cast<std::size_t>(k)];
    tx(r) = raw_truth_pairs[static_cast<std::size_t>(r)].second.x;
    ty(r) = raw_truth_pairs[static_cast<std::size_t>(r)].second.y;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < CalibrationModel::kTerms)
    throw std::runtime_error("calibration design matrix is rank deficient");

  const Eigen::VectorXd cx = qr.solve(tx);
  const Eigen::VectorXd cy = qr.solve(ty);

  CalibrationModel model;
  for (int k = 0; k < CalibrationModel::kTerms; ++k) {
    model.coef_x[static_cast<std::size_t>(k)] = cx(k);
    model.coef_y[static_cast<std::size_t>(k)] = cy(k);
  }
  model.residual_rms_x = std::sqrt((design * cx - tx).squaredNorm() / count);
  model.residual_rms_y = std::sqrt((design * cy - ty).squaredNorm() / count);
  return model;
}

SpotSet apply_calibration(const CalibrationModel& model, const SpotSet& spots) {
  SpotSet out = spots;
  for (Vec2& c : out.centroids) c = model.apply(c);
  return out;
}

void save_calibration(const CalibrationModel& model,
                      const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << "term,coef_x,coef_y\n";
  for (int k = 0; k < CalibrationModel::kTerms; ++k) {
    os << kTermNames[k] << ',' << format_double(model.coef_x[static_cast<std::size_t>(k)])
       << ',' << format_double(model.coef_y[static_cast<std::size_t>(k)]) << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

CalibrationModel load_calibration(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open for reading: " + path.string());
  std::string line;
  if (!std::getline(is, line) || trim(line) != "term,coef_x,coef_y")
    throw std::runtime_error("bad calibration header in " + path.string());
  CalibrationModel model;
  for (int k = 0; k < CalibrationModel::kTerms; ++k) {
    if (!std::getline(is, line))
      throw std::runtime_error("truncated calibration file " + path.string());
    const auto fields = split(line, ',');
    if (fields.size() != 3 || fields[0] != kTermNames[k])
      throw std::runtime_error("unexpected calibration row '" + line + "'");
    model.coef_x[static_cast<std::size_t>(k)] = std::stod(fields[1]);
    model.coef_y[static_cast<std::size_t>(k)] = std::stod(fields[2]);
  }
  return model;
}

}  // namespace owmon
