#include "owmon/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "owmon/parallel.hpp"
#include "owmon/text.hpp"

namespace owmon {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

/// Standard normal CDF.
double phi(double t) { return 0.5 * std::erfc(-t * M_SQRT1_2); }

constexpr double kSpotCutoffSigmas = 6.0;

}  // namespace

SensorConfig SensorConfig::centered(int nx, int ny, double width,
                                    double height, double plane_z) {
  SensorConfig s;
  s.nx = nx;
  s.ny = ny;
  s.pitch_x = width / nx;
  s.pitch_y = height / ny;
  s.x_min = -width / 2.0;
  s.y_min = -height / 2.0;
  s.plane_z = plane_z;
  s.validate();
  return s;
}

void SensorConfig::validate() const {
  require(nx >= 1, "sensor nx must be >= 1");
  require(ny >= 1, "sensor ny must be >= 1");
  require(pitch_x > 0.0 && pitch_y > 0.0, "pixel pitch must be > 0");
  require(plane_z > 0.0, "sensor plane position must be > 0");
}

PixelRect pixel_bounds(int m, int n, const SensorConfig& sensor) {
  if (m < 0 || m >= sensor.nx || n < 0 || n >= sensor.ny)
    throw std::out_of_range("pixel index outside sensor grid");
  PixelRect r;
  r.x_lo = sensor.x_min + m * sensor.pitch_x;
  r.x_hi = sensor.x_min + (m + 1) * sensor.pitch_x;
  r.y_lo = sensor.y_min + n * sensor.pitch_y;
  r.y_hi = sensor.y_min + (n + 1) * sensor.pitch_y;
  return r;
}

void AcquisitionConfig::validate() const {
  require(t_int > 0.0, "integration time must be > 0");
  require(t_coh > 0.0, "coherence time must be > 0");
  require(noise_n0 >= 0.0, "noise variance must be >= 0");
  require(noise_scale >= 0.0, "noise scale must be >= 0");
  require(slots() >= 1, "integration time must cover at least one slot");
}

void SceneConfig::validate() const {
  require(!count_choices.empty(), "scene count choices must not be empty");
  for (int n : count_choices)
    require(n >= 1, "scene transmitter counts must be >= 1");
  require(eavesdropper_fraction >= 0.0 && eavesdropper_fraction <= 1.0,
          "eavesdropper fraction must be in [0,1]");
  require(min_separation >= 0.0, "min separation must be >= 0");
  require(claimed_noise_sigma >= 0.0, "claim noise must be >= 0");
  require(area_half_widths.x > 0.0 && area_half_widths.y > 0.0,
          "area half widths must be > 0");
  require(uav_altitude > 0.0, "altitude must be > 0");
  beam.validate();
  if (eavesdropper_count >= 0) {
    const int n_min = *std::min_element(count_choices.begin(), count_choices.end());
    require(eavesdropper_count <= n_min,
            "eavesdropper count exceeds smallest transmitter count");
  }
}

double Frame::sum() const {
  return std::accumulate(pixels.begin(), pixels.end(), 0.0);
}

double pixel_contribution(Vec2 spot_center, double spot_energy,
                          double sigma_eff, const PixelRect& rect) {
  if (sigma_eff <= 0.0) throw std::domain_error("sigma_eff must be > 0");
  if (spot_energy < 0.0) throw std::domain_error("spot energy must be >= 0");
  const double fx = phi((rect.x_hi - spot_center.x) / sigma_eff) -
                    phi((rect.x_lo - spot_center.x) / sigma_eff);
  const double fy = phi((rect.y_hi - spot_center.y) / sigma_eff) -
                    phi((rect.y_lo - spot_center.y) / sigma_eff);
  return spot_energy * fx * fy;
}

namespace {

/// Deposits one spot into the accumulation buffer. Pixels farther than the
/// cutoff from the spot center are skipped; the truncated mass is < 1e-8.
void deposit_spot(std::vector<double>& acc, const SensorConfig& sensor,
                  Vec2 center, double energy, double sigma) {
  const double reach = kSpotCutoffSigmas * sigma;
  const int m_lo = std::max(
      0, static_cast<int>(std::floor((center.x - reach - sensor.x_min) / sensor.pitch_x)));
  const int m_hi = std::min(
      sensor.nx - 1,
      static_cast<int>(std::floor((center.x + reach - sensor.x_min) / sensor.pitch_x)));
  const int n_lo = std::max(
      0, static_cast<int>(std::floor((center.y - reach - sensor.y_min) / sensor.pitch_y)));
  const int n_hi = std::min(
      sensor.ny - 1,
      static_cast<int>(std::floor((center.y + reach - sensor.y_min) / sensor.pitch_y)));
  if (m_lo > m_hi || n_lo > n_hi) return;

  // Separable CDF differences along each axis, then an outer product.
  std::vector<double> fx(static_cast<std::size_t>(m_hi - m_lo + 1));
  std::vector<double> fy(static_cast<std::size_t>(n_hi - n_lo + 1));
  double prev = phi((sensor.x_min + m_lo * sensor.pitch_x - center.x) / sigma);
  for (int m = m_lo; m <= m_hi; ++m) {
    const double next =
        phi((sensor.x_min + (m + 1) * sensor.pitch_x - center.x) / sigma);
    fx[static_cast<std::size_t>(m - m_lo)] = next - prev;
    prev = next;
  }
  prev = phi((sensor.y_min + n_lo * sensor.pitch_y - center.y) / sigma);
  for (int n = n_lo; n <= n_hi; ++n) {
    const double next =
        phi((sensor.y_min + (n + 1) * sensor.pitch_y - center.y) / sigma);
    fy[static_cast<std::size_t>(n - n_lo)] = next - prev;
    prev = next;
  }

  for (int n = n_lo; n <= n_hi; ++n) {
    const double ey = energy * fy[static_cast<std::size_t>(n - n_lo)];
    double* row = acc.data() + static_cast<std::size_t>(n) * sensor.nx;
    for (int m = m_lo; m <= m_hi; ++m)
      row[m] += ey * fx[static_cast<std::size_t>(m - m_lo)];
  }
}

}  // namespace

Frame render_frame(const Scene& scene, const TurbulenceParams& turbulence,
                   const LensConfig& lens, const SensorConfig& sensor,
                   const AcquisitionConfig& acq, RngStream& rng,
                   const RenderOptions& options) {
  turbulence.validate();
  lens.validate();
  sensor.validate();
  acq.validate();
  if (sensor.plane_z > lens.focal_length_f)
    throw std::invalid_argument("sensor plane lies beyond the focal plane");

  const double sigma = blur_sigma_eff(lens, sensor.plane_z).sigma_eff;
  if (sigma <= 0.0)
    throw std::invalid_argument("zero blur cannot be rendered onto pixels");

  const int slot_count = acq.slots();
  const std::size_t n_tx = scene.transmitters.size();

  struct SpotGeometry {
    LinkGeometry link;
    Vec2 sensor_point;
  };
  std::vector<SpotGeometry> spots(n_tx);
  for (std::size_t i = 0; i < n_tx; ++i) {
    spots[i].link = LinkGeometry::from_ground(scene.transmitters[i].true_position,
                                              scene.uav_altitude);
    spots[i].sensor_point = angle_to_sensor(spots[i].link.angles, sensor.plane_z);
  }

  std::vector<Vec2> frame_jitter(n_tx, Vec2{0.0, 0.0});
  if (options.jitter && options.jitter_constant_over_frame) {
    for (std::size_t i = 0; i < n_tx; ++i) {
      const auto& beam = scene.transmitters[i].beam;
      frame_jitter[i] = {rng.normal(beam.jitter_mu, beam.jitter_sigma),
                         rng.normal(beam.jitter_mu, beam.jitter_sigma)};
    }
  }

  std::vector<double> acc(sensor.pixel_count(), 0.0);
  for (int k = 0; k < slot_count; ++k) {
    for (std::size_t i = 0; i < n_tx; ++i) {
      const auto& tx = scene.transmitters[i];
      const double fade =
          options.turbulence ? sample_turbulence(turbulence, rng) : 1.0;
      Vec2 offset = frame_jitter[i];
      if (options.jitter && !options.jitter_constant_over_frame)
        offset = {rng.normal(tx.beam.jitter_mu, tx.beam.jitter_sigma),
                  rng.normal(tx.beam.jitter_mu, tx.beam.jitter_sigma)};
      const double power =
          collected_power(tx.beam, spots[i].link, lens, offset, fade);
      const double energy = acq.t_int * lens.sensor_efficiency_eta_s * power;
      deposit_spot(acc, sensor, spots[i].sensor_point, energy, sigma);
    }
  }

  Frame frame;
  frame.sensor = sensor;
  frame.seed = rng.seed();
  frame.scene_id = scene.id;
  frame.pixels.resize(acc.size());
  const double inv_slots = 1.0 / slot_count;
  for (std::size_t j = 0; j < acc.size(); ++j) frame.pixels[j] = acc[j] * inv_slots;

  if (options.noise && acq.noise_n0 > 0.0 && acq.noise_scale > 0.0) {
    const double noise_std = std::sqrt(acq.noise_n0 * acq.noise_scale);
    for (double& v : frame.pixels) v += rng.normal(0.0, noise_std);
  }
  return frame;
}

Scene generate_scene(RngStream& rng, const SceneConfig& cfg) {
  cfg.validate();
  Scene scene;
  scene.uav_altitude = cfg.uav_altitude;
  scene.area_half_widths = cfg.area_half_widths;

  const int n = cfg.count_choices[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<long>(cfg.count_choices.size()) - 1))];

  std::vector<Vec2> positions;
  positions.reserve(static_cast<std::size_t>(n));
  int attempts = 0;
  while (static_cast<int>(positions.size()) < n) {
    Vec2 p{rng.uniform(-cfg.area_half_widths.x, cfg.area_half_widths.x),
           rng.uniform(-cfg.area_half_widths.y, cfg.area_half_widths.y)};
    bool clear = true;
    if (cfg.min_separation > 0.0) {
      for (const Vec2& q : positions)
        if (distance(p, q) < cfg.min_separation) { clear = false; break; }
    }
    if (clear) {
      positions.push_back(p);
      attempts = 0;
    } else if (++attempts > 100000) {
      throw std::runtime_error("scene separation constraint is infeasible");
    }
  }

  std::vector<bool> eavesdropper(static_cast<std::size_t>(n), false);
  if (cfg.eavesdropper_count >= 0) {
    // Partial Fisher-Yates pick of exactly eavesdropper_count indices.
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int k = 0; k < cfg.eavesdropper_count; ++k) {
      const long j = rng.uniform_int(k, n - 1);
      std::swap(idx[static_cast<std::size_t>(k)], idx[static_cast<std::size_t>(j)]);
      eavesdropper[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])] = true;
    }
  } else if (cfg.eavesdropper_fraction > 0.0) {
    for (int i = 0; i < n; ++i)
      eavesdropper[static_cast<std::size_t>(i)] =
          rng.uniform(0.0, 1.0) < cfg.eavesdropper_fraction;
  }

  for (int i = 0; i < n; ++i) {
    Transmitter tx;
    tx.true_position = positions[static_cast<std::size_t>(i)];
    tx.beam = cfg.beam;
    tx.legitimate = !eavesdropper[static_cast<std::size_t>(i)];
    if (tx.legitimate) {
      Vec2 claim = tx.true_position;
      if (cfg.claimed_noise_sigma > 0.0)
        claim = claim + Vec2{rng.normal(0.0, cfg.claimed_noise_sigma),
                             rng.normal(0.0, cfg.claimed_noise_sigma)};
      tx.claimed_position = claim;
    }
    scene.transmitters.push_back(std::move(tx));
  }
  return scene;
}

namespace {

template <typename T>
void write_le(std::ostream& os, T value) {
  // Little-endian host assumed (x86-64 / aarch64 targets).
  os.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

template <typename T>
T read_le(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(value));
  return value;
}

}  // namespace

void write_frame(const Frame& frame, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os.write("OWFR", 4);
  write_le<std::uint32_t>(os, 1);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(frame.sensor.nx));
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(frame.sensor.ny));
  for (double v : frame.pixels) write_le<double>(os, v);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

Frame read_frame(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "OWFR", 4) != 0)
    throw std::runtime_error("not a frame dump: " + path.string());
  const auto version = read_le<std::uint32_t>(is);
  if (version != 1)
    throw std::runtime_error("unsupported frame dump version: " + path.string());
  const auto nx = read_le<std::uint32_t>(is);
  const auto ny = read_le<std::uint32_t>(is);
  if (nx == 0 || ny == 0 || nx > (1u << 20) || ny > (1u << 20))
    throw std::runtime_error("corrupt frame dimensions: " + path.string());

  // The dump carries only the pixel matrix; physical geometry defaults to
  // the 3x3 cm focal-plane layout and can be overridden by the caller.
  Frame frame;
  frame.sensor = SensorConfig::centered(static_cast<int>(nx), static_cast<int>(ny),
                                        0.03, 0.03, 0.03);
  frame.pixels.resize(static_cast<std::size_t>(nx) * ny);
  for (double& v : frame.pixels) v = read_le<double>(is);
  if (!is) throw std::runtime_error("truncated frame dump: " + path.string());
  return frame;
}

DatasetResult export_dataset(int count, const SceneConfig& scene_cfg,
                             const TurbulenceParams& turbulence,
                             const LensConfig& lens, const SensorConfig& sensor,
                             const AcquisitionConfig& acq,
                             const RenderOptions& options,
                             std::uint64_t master_seed,
                             const std::filesystem::path& out_dir,
                             int threads) {
  if (count < 1) throw std::invalid_argument("dataset count must be >= 1");
  scene_cfg.validate();
  std::filesystem::create_directories(out_dir);

  std::vector<Scene> scenes(static_cast<std::size_t>(count));
  std::vector<Frame> frames(static_cast<std::size_t>(count));
  parallel_for_index(static_cast<std::size_t>(count), threads, [&](std::size_t i) {
    RngStream stream = RngStream::derive(master_seed, {i});
    scenes[i] = generate_scene(stream, scene_cfg);
    scenes[i].id = i;
    frames[i] = render_frame(scenes[i], turbulence, lens, sensor, acq, stream,
                             options);
  });

  // Single writer; frames land on disk in index order.
  std::ofstream truth(out_dir / "truth.csv");
  if (!truth) throw std::runtime_error("cannot write " + (out_dir / "truth.csv").string());
  truth << "frame_id,tx_id,legit,x_true_m,y_true_m,x_claimed_m,y_claimed_m,power_w\n";
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%06d.owfr", i);
    write_frame(frames[static_cast<std::size_t>(i)], out_dir / name);
    const auto& scene = scenes[static_cast<std::size_t>(i)];
    for (std::size_t t = 0; t < scene.transmitters.size(); ++t) {
      const auto& tx = scene.transmitters[t];
      truth << i << ',' << t << ',' << (tx.legitimate ? 1 : 0) << ','
            << format_double(tx.true_position.x) << ','
            << format_double(tx.true_position.y) << ',';
      if (tx.claimed_position) {
        truth << format_double(tx.claimed_position->x) << ','
              << format_double(tx.claimed_position->y);
      } else {
        truth << ',';
      }
      truth << ',' << format_double(tx.beam.tx_power) << '\n';
    }
  }
  if (!truth) throw std::runtime_error("write failed: truth.csv");
  return {out_dir, count};
}

}  // namespace owmon
