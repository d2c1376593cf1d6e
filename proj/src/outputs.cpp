#include "owmon/outputs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "owmon/text.hpp"

namespace owmon {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write to " + path.string());
  return os;
}

std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

void write_sweep_csv(const ExperimentReport& report,
                     const std::filesystem::path& path) {
  auto os = open_out(path);
  os << "array_n,trials,mse_m2,miss_rate,false_peak_rate,anomaly_precision,"
        "anomaly_recall,runtime_ms\n";
  for (const SizeSummary& s : report.sizes) {
    os << s.array_n << ',' << s.trials << ',' << format_double(s.mse_m2) << ','
       << format_double(s.miss_rate) << ',' << format_double(s.false_peak_rate)
       << ',' << format_double(s.anomaly_precision) << ','
       << format_double(s.anomaly_recall) << ",0\n";
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

void write_trials_csv(const ExperimentReport& report,
                      const std::filesystem::path& path) {
  auto os = open_out(path);
  os << "array_n,trial,n_true,n_eaves,n_detected,matched,misses,false_peaks,"
        "mse_m2,anomaly_tp,anomaly_fp,anomaly_fn,failed\n";
  for (const TrialOutcome& t : report.trials) {
    os << t.array_n << ',' << t.trial_index << ',' << t.n_true << ','
       << t.n_eaves << ',' << t.n_detected << ',' << t.matched << ','
       << t.misses << ',' << t.false_peaks << ',';
    const auto mse = t.mse_m2();
    os << (mse ? format_double(*mse) : std::string()) << ',' << t.anomaly_tp
       << ',' << t.anomaly_fp << ',' << t.anomaly_fn << ','
       << (t.failed ? 1 : 0) << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

void write_anomaly_csv(std::span<const GroundEstimate> estimates, long trial,
                       const std::filesystem::path& path) {
  auto os = open_out(path);
  os << "trial,est_x_m,est_y_m,matched_claim_id,anomaly\n";
  for (const GroundEstimate& e : estimates) {
    os << trial << ',' << format_double(e.position.x) << ','
       << format_double(e.position.y) << ',';
    if (e.matched_claim) os << *e.matched_claim;
    os << ',' << (e.anomaly ? 1 : 0) << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

void write_mse_plot_svg(const ExperimentReport& report,
                        const std::filesystem::path& path) {
  const double width = 640, height = 420;
  const double ml = 70, mr = 20, mt = 20, mb = 50;
  const double pw = width - ml - mr, ph = height - mt - mb;

  double lo = 1e300, hi = -1e300;
  int n_lo = 0, n_hi = 1;
  for (const SizeSummary& s : report.sizes) {
    if (s.mse_m2 > 0.0) {
      lo = std::min(lo, s.mse_m2);
      hi = std::max(hi, s.mse_m2);
    }
    n_lo = std::min(n_lo == 0 ? s.array_n : n_lo, s.array_n);
    n_hi = std::max(n_hi, s.array_n);
  }
  if (lo > hi) { lo = 0.1; hi = 10.0; }
  double dec_lo = std::floor(std::log10(lo));
  double dec_hi = std::ceil(std::log10(hi));
  if (dec_hi <= dec_lo) dec_hi = dec_lo + 1;

  auto sx = [&](double n) {
    return ml + pw * (n - n_lo) / std::max(1, n_hi - n_lo);
  };
  auto sy = [&](double mse) {
    const double t = (std::log10(mse) - dec_lo) / (dec_hi - dec_lo);
    return mt + ph * (1.0 - t);
  };

  auto os = open_out(path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' '
     << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Decade gridlines and y tick labels.
  for (double dec = dec_lo; dec <= dec_hi + 0.5; dec += 1.0) {
    const double y = sy(std::pow(10.0, dec));
    os << "<line x1=\"" << svg_num(ml) << "\" y1=\"" << svg_num(y)
       << "\" x2=\"" << svg_num(ml + pw) << "\" y2=\"" << svg_num(y)
       << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << svg_num(ml - 8) << "\" y=\"" << svg_num(y + 4)
       << "\" text-anchor=\"end\" font-size=\"12\">1e"
       << static_cast<long>(dec) << "</text>\n";
  }
  // X ticks at the measured sizes.
  for (const SizeSummary& s : report.sizes) {
    const double x = sx(s.array_n);
    os << "<line x1=\"" << svg_num(x) << "\" y1=\"" << svg_num(mt + ph)
       << "\" x2=\"" << svg_num(x) << "\" y2=\"" << svg_num(mt + ph + 5)
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << svg_num(x) << "\" y=\"" << svg_num(mt + ph + 20)
       << "\" text-anchor=\"middle\" font-size=\"12\">" << s.array_n
       << "</text>\n";
  }
  os << "<line x1=\"" << svg_num(ml) << "\" y1=\"" << svg_num(mt) << "\" x2=\""
     << svg_num(ml) << "\" y2=\"" << svg_num(mt + ph)
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << svg_num(ml) << "\" y1=\"" << svg_num(mt + ph)
     << "\" x2=\"" << svg_num(ml + pw) << "\" y2=\"" << svg_num(mt + ph)
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << svg_num(ml + pw / 2) << "\" y=\""
     << svg_num(height - 10)
     << "\" text-anchor=\"middle\" font-size=\"13\">array side N</text>\n";
  os << "<text x=\"16\" y=\"" << svg_num(mt + ph / 2)
     << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
     << svg_num(mt + ph / 2) << ")\">MSE [m^2]</text>\n";

  std::string points;
  for (const SizeSummary& s : report.sizes) {
    if (s.mse_m2 <= 0.0) continue;
    if (!points.empty()) points += ' ';
    points += svg_num(sx(s.array_n)) + "," + svg_num(sy(s.mse_m2));
  }
  os << "<polyline points=\"" << points
     << "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
  for (const SizeSummary& s : report.sizes) {
    if (s.mse_m2 <= 0.0) continue;
    os << "<circle cx=\"" << svg_num(sx(s.array_n)) << "\" cy=\""
       << svg_num(sy(s.mse_m2)) << "\" r=\"4\" fill=\"#1f77b4\"/>\n";
  }
  os << "</svg>\n";
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

void write_frame_overlay_svg(const Frame& frame,
                             std::span<const Vec2> truth_sensor_points,
                             std::span<const Vec2> estimate_sensor_points,
                             const std::filesystem::path& path) {
  const auto& grid = frame.sensor;
  const double scale = 512.0 / std::max(grid.width(), grid.height());
  const double w = grid.width() * scale;
  const double h = grid.height() * scale;

  double peak = 0.0;
  for (double v : frame.pixels) peak = std::max(peak, v);
  const double inv = peak > 0.0 ? 1.0 / peak : 0.0;

  // Sensor y points up; SVG y points down.
  auto px = [&](double x) { return (x - grid.x_min) * scale; };
  auto py = [&](double y) { return h - (y - grid.y_min) * scale; };

  auto os = open_out(path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg_num(w)
     << "\" height=\"" << svg_num(h) << "\" viewBox=\"0 0 " << svg_num(w)
     << ' ' << svg_num(h) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"black\"/>\n";
  const double cw = grid.pitch_x * scale;
  const double ch = grid.pitch_y * scale;
  for (int n = 0; n < grid.ny; ++n) {
    for (int m = 0; m < grid.nx; ++m) {
      const double v = std::max(0.0, frame.at(m, n)) * inv;
      if (v <= 0.0) continue;
      const int level = static_cast<int>(std::lround(255.0 * std::sqrt(v)));
      os << "<rect x=\"" << svg_num(m * cw) << "\" y=\""
         << svg_num(h - (n + 1) * ch) << "\" width=\"" << svg_num(cw)
         << "\" height=\"" << svg_num(ch) << "\" fill=\"rgb(" << level << ','
         << level << ',' << level << ")\"/>\n";
    }
  }
  for (const Vec2& t : truth_sensor_points) {
    os << "<circle cx=\"" << svg_num(px(t.x)) << "\" cy=\"" << svg_num(py(t.y))
       << "\" r=\"6\" fill=\"none\" stroke=\"#00cc44\" stroke-width=\"2\"/>\n";
  }
  for (const Vec2& e : estimate_sensor_points) {
    const double cx = px(e.x), cy = py(e.y);
    os << "<line x1=\"" << svg_num(cx - 5) << "\" y1=\"" << svg_num(cy - 5)
       << "\" x2=\"" << svg_num(cx + 5) << "\" y2=\"" << svg_num(cy + 5)
       << "\" stroke=\"#ff3333\" stroke-width=\"2\"/>\n";
    os << "<line x1=\"" << svg_num(cx - 5) << "\" y1=\"" << svg_num(cy + 5)
       << "\" x2=\"" << svg_num(cx + 5) << "\" y2=\"" << svg_num(cy - 5)
       << "\" stroke=\"#ff3333\" stroke-width=\"2\"/>\n";
  }
  os << "</svg>\n";
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

void write_run_log(const ExperimentReport& report,
                   const std::filesystem::path& path) {
  auto os = open_out(path);
  for (const SizeSummary& s : report.sizes) {
    os << "size " << s.array_n << "x" << s.array_n << ": trials=" << s.trials
       << " failures=" << s.failures << " mse_m2=" << s.mse_m2
       << " gate_m=" << s.gate_radius_m
       << " mean_trial_runtime_ms=" << s.mean_runtime_ms << '\n';
  }
  for (const TrialOutcome& t : report.trials) {
    if (t.failed)
      os << "failed trial " << t.array_n << "/" << t.trial_index << ": "
         << t.error << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace owmon
