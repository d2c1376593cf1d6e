#pragma once
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "owmon/optics.hpp"
#include "owmon/rng.hpp"
#include "owmon/vec.hpp"

namespace owmon {

/// Pixel grid on the sensor plane. The grid is centered on the optical axis:
/// the origin corner sits at (-nx*pitch/2, -ny*pitch/2).
struct SensorConfig {
  int nx = 64;
  int ny = 64;
  double pitch_x = 0.03 / 64;
  double pitch_y = 0.03 / 64;
  double x_min = -0.015;
  double y_min = -0.015;
  double plane_z = 0.03;  // axial position, default = focal length

  static SensorConfig centered(int nx, int ny, double width, double height,
                               double plane_z);

  double width() const { return nx * pitch_x; }
  double height() const { return ny * pitch_y; }
  Vec2 half_widths() const { return {width() / 2.0, height() / 2.0}; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
  }
  Vec2 pixel_center(int m, int n) const {
    return {x_min + (m + 0.5) * pitch_x, y_min + (n + 0.5) * pitch_y};
  }
  bool contains(Vec2 p) const {
    return p.x >= x_min && p.x <= x_min + width() && p.y >= y_min &&
           p.y <= y_min + height();
  }

  void validate() const;
};

/// Closed pixel rectangle [x_lo, x_hi] x [y_lo, y_hi] in meters.
struct PixelRect {
  double x_lo = 0.0, x_hi = 0.0, y_lo = 0.0, y_hi = 0.0;
};

/// Bounds of pixel (m, n); rectangles tile the sensor exactly.
PixelRect pixel_bounds(int m, int n, const SensorConfig& sensor);

/// Frame acquisition: integration time, fading coherence time and the
/// per-pixel thermal-noise variance (in the frame's energy units).
struct AcquisitionConfig {
  double t_int = 1.0;    // [s]
  double t_coh = 0.01;   // [s]
  double noise_n0 = 1e-12;
  double noise_scale = 1.0;  // multiplies noise_n0

  /// Number of independent fading slots averaged in one frame.
  int slots() const {
    return static_cast<int>(std::lround(t_int / t_coh));
  }

  void validate() const;
};

/// Simulation toggles for frame rendering. Defaults model everything.
struct RenderOptions {
  bool turbulence = true;
  bool jitter = true;
  bool noise = true;
  /// Draw the jitter offset once per frame instead of once per slot.
  bool jitter_constant_over_frame = false;
};

/// One ground transmitter. Legitimate users carry the position they report
/// to the network; eavesdroppers report nothing.
struct Transmitter {
  Vec2 true_position;
  BeamParams beam;
  bool legitimate = true;
  std::optional<Vec2> claimed_position;
};

struct Scene {
  std::vector<Transmitter> transmitters;
  double uav_altitude = 300.0;
  Vec2 area_half_widths = {125.0, 125.0};
  std::uint64_t id = 0;
};

/// Pixel-energy matrix produced by one acquisition.
struct Frame {
  SensorConfig sensor;
  std::vector<double> pixels;  // row-major, rows = y index n
  std::uint64_t seed = 0;
  std::uint64_t scene_id = 0;

  double& at(int m, int n) { return pixels[static_cast<std::size_t>(n) * sensor.nx + m]; }
  double at(int m, int n) const { return pixels[static_cast<std::size_t>(n) * sensor.nx + m]; }
  double sum() const;
};

/// Energy a Gaussian spot of the given std deposits into one pixel.
/// spot_energy is the total on-sensor energy of the spot (T_int eta_s P_L);
/// the pixel share is the product of per-axis normal-CDF differences.
double pixel_contribution(Vec2 spot_center, double spot_energy,
                          double sigma_eff, const PixelRect& rect);

/// Renders one frame: per coherence slot, fresh turbulence fades and jitter
/// offsets per transmitter, spot deposition with the blur at the sensor
/// plane, slot averaging, then additive thermal noise.
Frame render_frame(const Scene& scene, const TurbulenceParams& turbulence,
                   const LensConfig& lens, const SensorConfig& sensor,
                   const AcquisitionConfig& acq, RngStream& rng,
                   const RenderOptions& options = {});

/// Random-scene generation parameters.
struct SceneConfig {
  std::vector<int> count_choices = {5, 6, 7, 8, 9};
  double eavesdropper_fraction = 0.25;
  int eavesdropper_count = -1;  // >= 0 pins the eavesdropper count
  double min_separation = 0.0;  // rejection-sampled pairwise floor [m]
  double claimed_noise_sigma = 0.0;  // report noise for legitimate users [m]
  Vec2 area_half_widths = {125.0, 125.0};
  double uav_altitude = 300.0;
  BeamParams beam;

  void validate() const;
};

Scene generate_scene(RngStream& rng, const SceneConfig& cfg);

/// Binary frame dump, little-endian: magic "OWFR", version u32, nx u32,
/// ny u32, then ny*nx float64 row-major pixel values.
void write_frame(const Frame& frame, const std::filesystem::path& path);
Frame read_frame(const std::filesystem::path& path);

struct DatasetResult {
  std::filesystem::path directory;
  int frame_count = 0;
};

/// Writes `count` frames plus a ground-truth CSV into out_dir. Frames are
/// rendered in parallel from per-frame streams derived from the master
/// seed; output is deterministic for a given seed.
DatasetResult export_dataset(int count, const SceneConfig& scene_cfg,
                             const TurbulenceParams& turbulence,
                             const LensConfig& lens, const SensorConfig& sensor,
                             const AcquisitionConfig& acq,
                             const RenderOptions& options,
                             std::uint64_t master_seed,
                             const std::filesystem::path& out_dir,
                             int threads = 0);

}  // namespace owmon
