#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "doctest.h"
#include "owmon/sensor.hpp"

using namespace owmon;

namespace {

LensConfig narrow_lens(double sigma) {
  LensConfig lens;
  lens.sigma_diff0 = sigma;
  return lens;
}

Scene single_tx_scene(Vec2 ground, double altitude = 300.0) {
  Scene scene;
  scene.uav_altitude = altitude;
  Transmitter tx;
  tx.true_position = ground;
  tx.claimed_position = ground;
  scene.transmitters.push_back(tx);
  return scene;
}

const RenderOptions kCleanRender{false, false, false, false};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

}  // namespace

TEST_CASE("pixel bounds tile the sensor") {
  const SensorConfig sensor = SensorConfig::centered(64, 64, 0.03, 0.03, 0.03);
  const PixelRect first = pixel_bounds(0, 0, sensor);
  CHECK(first.x_lo == doctest::Approx(-0.015).epsilon(1e-15));
  CHECK(first.x_hi == doctest::Approx(-0.015 + 0.03 / 64).epsilon(1e-15));

  double width = 0.0;
  for (int m = 0; m < sensor.nx; ++m) {
    const PixelRect r = pixel_bounds(m, 0, sensor);
    width += r.x_hi - r.x_lo;
    if (m > 0) CHECK(r.x_lo == pixel_bounds(m - 1, 0, sensor).x_hi);
  }
  CHECK(width == doctest::Approx(0.03).epsilon(1e-12));

  const SensorConfig odd = SensorConfig::centered(65, 65, 0.03, 0.03, 0.03);
  const PixelRect center = pixel_bounds(32, 32, odd);
  CHECK(center.x_lo < 0.0);
  CHECK(center.x_hi > 0.0);
  CHECK(center.y_lo < 0.0);
  CHECK(center.y_hi > 0.0);

  CHECK_THROWS_AS(pixel_bounds(64, 0, sensor), std::out_of_range);
  CHECK_THROWS_AS(pixel_bounds(0, -1, sensor), std::out_of_range);
}

TEST_CASE("pixel contribution") {
  const double sigma = 0.001;
  const double energy = 3.0;

  SUBCASE("a huge pixel captures everything") {
    const PixelRect big{-10 * sigma, 10 * sigma, -10 * sigma, 10 * sigma};
    CHECK(pixel_contribution({0, 0}, energy, sigma, big) ==
          doctest::Approx(energy).epsilon(1e-15));
  }

  SUBCASE("square pixel of half-width sigma") {
    const PixelRect rect{-sigma, sigma, -sigma, sigma};
    const double expected = energy * 0.682689 * 0.682689;  // Phi(1)-Phi(-1) squared
    CHECK(pixel_contribution({0, 0}, energy, sigma, rect) ==
          doctest::Approx(expected).epsilon(1e-5));
  }

  SUBCASE("spot on a shared corner splits evenly") {
    const double p = 0.002;
    const Vec2 corner{0.0, 0.0};
    const PixelRect q1{0, p, 0, p}, q2{-p, 0, 0, p}, q3{-p, 0, -p, 0},
        q4{0, p, -p, 0};
    const double c1 = pixel_contribution(corner, energy, sigma, q1);
    const double captured =
        c1 + pixel_contribution(corner, energy, sigma, q2) +
        pixel_contribution(corner, energy, sigma, q3) +
        pixel_contribution(corner, energy, sigma, q4);
    for (const PixelRect& q : {q2, q3, q4})
      CHECK(pixel_contribution(corner, energy, sigma, q) ==
            doctest::Approx(c1).epsilon(1e-12));
    CHECK(c1 == doctest::Approx(captured / 4.0).epsilon(1e-12));
  }

  SUBCASE("domain errors") {
    const PixelRect rect{0, 1, 0, 1};
    CHECK_THROWS_AS(pixel_contribution({0, 0}, 1.0, 0.0, rect), std::domain_error);
    CHECK_THROWS_AS(pixel_contribution({0, 0}, -1.0, 1.0, rect), std::domain_error);
  }
}

TEST_CASE("pixel contributions over an enlarged sensor sum to the spot energy") {
  const double sigma = 0.0015;
  const double energy = 0.042;
  const Vec2 spot{0.0004, -0.0007};
  // A grid wide enough to cover +-10 sigma around the spot.
  const SensorConfig grid = SensorConfig::centered(40, 40, 0.032, 0.032, 0.03);
  double total = 0.0;
  for (int n = 0; n < grid.ny; ++n)
    for (int m = 0; m < grid.nx; ++m)
      total += pixel_contribution(spot, energy, sigma, pixel_bounds(m, n, grid));
  CHECK(total == doctest::Approx(energy).epsilon(1e-6));
}

TEST_CASE("noise-only frame calibration") {
  const SensorConfig sensor = SensorConfig::centered(64, 64, 0.03, 0.03, 0.03);
  AcquisitionConfig acq;
  Scene empty;
  empty.transmitters.clear();
  RngStream rng(11);
  const Frame frame = render_frame(empty, {}, {}, sensor, acq, rng);

  double sum = 0.0, sum_sq = 0.0;
  for (double v : frame.pixels) {
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(frame.pixels.size());
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  // Mean within 4 standard errors of zero, variance within 5% of N0.
  CHECK(std::abs(mean) < 4.0 * std::sqrt(acq.noise_n0 / n));
  CHECK(var == doctest::Approx(acq.noise_n0).epsilon(0.05));
}

TEST_CASE("noiseless single-transmitter frame conserves the collected energy") {
  const LensConfig lens = narrow_lens(0.002);
  const SensorConfig sensor = SensorConfig::centered(64, 64, 0.03, 0.03, 0.03);
  AcquisitionConfig acq;
  RngStream rng(3);

  for (int i = 0; i < 20; ++i) {
    // Spot at least 4 sigma inside every edge.
    const double margin = (0.015 - 4.0 * 0.002) / 0.03 * 250.0;
    const Vec2 ground{rng.uniform(-margin, margin), rng.uniform(-margin, margin)};
    const Scene scene = single_tx_scene(ground);
    RngStream frame_rng(100 + static_cast<std::uint64_t>(i));
    const Frame frame =
        render_frame(scene, {}, lens, sensor, acq, frame_rng, kCleanRender);

    const auto link = LinkGeometry::from_ground(ground, scene.uav_altitude);
    const double expected =
        acq.t_int * lens.sensor_efficiency_eta_s *
        collected_power(scene.transmitters[0].beam, link, lens, {0, 0}, 1.0);
    CHECK(frame.sum() == doctest::Approx(expected).epsilon(1e-3));
    CHECK(frame.sum() >= 0.999 * expected);
  }
}

TEST_CASE("rendering is additive over transmitters without noise") {
  const LensConfig lens = narrow_lens(0.002);
  const SensorConfig sensor = SensorConfig::centered(48, 48, 0.03, 0.03, 0.03);
  AcquisitionConfig acq;

  Scene both = single_tx_scene({40.0, -30.0});
  Transmitter second;
  second.true_position = {-60.0, 80.0};
  second.claimed_position = second.true_position;
  both.transmitters.push_back(second);

  Scene first_only = single_tx_scene({40.0, -30.0});
  Scene second_only = single_tx_scene({-60.0, 80.0});

  RngStream r1(1), r2(1), r3(1);
  const Frame fb = render_frame(both, {}, lens, sensor, acq, r1, kCleanRender);
  const Frame fa = render_frame(first_only, {}, lens, sensor, acq, r2, kCleanRender);
  const Frame fc = render_frame(second_only, {}, lens, sensor, acq, r3, kCleanRender);

  for (std::size_t j = 0; j < fb.pixels.size(); ++j)
    CHECK(fb.pixels[j] ==
          doctest::Approx(fa.pixels[j] + fc.pixels[j]).epsilon(1e-12));
}

TEST_CASE("slot averaging shrinks the signal variance as 1/K") {
  const LensConfig lens = narrow_lens(0.001);
  const SensorConfig sensor = SensorConfig::centered(32, 32, 0.03, 0.03, 0.03);
  RenderOptions turb_only;
  turb_only.jitter = false;
  turb_only.noise = false;

  // Eight well-separated transmitters fade independently, so their peak
  // pixels give independent variance estimates to average over.
  Scene scene;
  scene.uav_altitude = 300.0;
  std::vector<std::pair<int, int>> peak_pixels;
  for (double gx : {-90.0, -30.0, 30.0, 90.0}) {
    for (double gy : {-60.0, 60.0}) {
      Transmitter tx;
      tx.true_position = {gx, gy};
      tx.claimed_position = tx.true_position;
      scene.transmitters.push_back(tx);
      const auto link = LinkGeometry::from_ground({gx, gy}, 300.0);
      const Vec2 spot = angle_to_sensor(link.angles, sensor.plane_z);
      peak_pixels.emplace_back(
          static_cast<int>((spot.x - sensor.x_min) / sensor.pitch_x),
          static_cast<int>((spot.y - sensor.y_min) / sensor.pitch_y));
    }
  }

  auto mean_peak_variance = [&](double t_coh, std::uint64_t seed) {
    AcquisitionConfig acq;
    acq.t_coh = t_coh;
    RngStream rng(seed);
    const int reps = 200;
    std::vector<double> sum(peak_pixels.size(), 0.0);
    std::vector<double> sum_sq(peak_pixels.size(), 0.0);
    for (int r = 0; r < reps; ++r) {
      const Frame f = render_frame(scene, {4.0, 2.0}, lens, sensor, acq, rng,
                                   turb_only);
      for (std::size_t t = 0; t < peak_pixels.size(); ++t) {
        const double v = f.at(peak_pixels[t].first, peak_pixels[t].second);
        sum[t] += v;
        sum_sq[t] += v * v;
      }
    }
    double total = 0.0;
    for (std::size_t t = 0; t < peak_pixels.size(); ++t) {
      const double mean = sum[t] / reps;
      total += sum_sq[t] / reps - mean * mean;
    }
    return total / static_cast<double>(peak_pixels.size());
  };

  const double var_k1 = mean_peak_variance(1.0, 21);     // K = 1
  const double var_k100 = mean_peak_variance(0.01, 22);  // K = 100
  CHECK(var_k1 / var_k100 == doctest::Approx(100.0).epsilon(0.20));
}

TEST_CASE("rendering is deterministic in the seed") {
  const SensorConfig sensor = SensorConfig::centered(32, 32, 0.03, 0.03, 0.03);
  const Scene scene = single_tx_scene({25.0, 10.0});
  AcquisitionConfig acq;
  RngStream a(99), b(99), c(100);
  const Frame fa = render_frame(scene, {}, {}, sensor, acq, a);
  const Frame fb = render_frame(scene, {}, {}, sensor, acq, b);
  const Frame fc = render_frame(scene, {}, {}, sensor, acq, c);
  CHECK(fa.pixels == fb.pixels);
  CHECK(fa.pixels != fc.pixels);
}

TEST_CASE("scene generation") {
  SUBCASE("zero eavesdropper fraction means everyone claims a position") {
    SceneConfig cfg;
    cfg.eavesdropper_fraction = 0.0;
    RngStream rng(5);
    for (int i = 0; i < 50; ++i) {
      const Scene s = generate_scene(rng, cfg);
      for (const auto& tx : s.transmitters) {
        CHECK(tx.legitimate);
        REQUIRE(tx.claimed_position.has_value());
        CHECK(tx.claimed_position->x == tx.true_position.x);
      }
    }
  }

  SUBCASE("transmitter count is uniform over the choice set") {
    SceneConfig cfg;
    RngStream rng(6);
    std::map<int, int> histogram;
    const int scenes = 10000;
    for (int i = 0; i < scenes; ++i)
      ++histogram[static_cast<int>(generate_scene(rng, cfg).transmitters.size())];
    REQUIRE(histogram.size() == 5);
    const double expected = scenes / 5.0;
    const double sigma = std::sqrt(scenes * 0.2 * 0.8);
    for (const auto& [n, count] : histogram) {
      CHECK(n >= 5);
      CHECK(n <= 9);
      CHECK(std::abs(count - expected) < 3.0 * sigma);
    }
  }

  SUBCASE("positions stay inside the area") {
    SceneConfig cfg;
    RngStream rng(7);
    for (int i = 0; i < 200; ++i) {
      const Scene s = generate_scene(rng, cfg);
      for (const auto& tx : s.transmitters) {
        CHECK(std::abs(tx.true_position.x) <= 125.0);
        CHECK(std::abs(tx.true_position.y) <= 125.0);
      }
    }
  }

  SUBCASE("fixed eavesdropper count and minimum separation hold") {
    SceneConfig cfg;
    cfg.eavesdropper_count = 2;
    cfg.min_separation = 25.0;
    RngStream rng(8);
    for (int i = 0; i < 100; ++i) {
      const Scene s = generate_scene(rng, cfg);
      int eaves = 0;
      for (const auto& tx : s.transmitters) {
        if (!tx.legitimate) {
          ++eaves;
          CHECK(!tx.claimed_position.has_value());
        }
      }
      CHECK(eaves == 2);
      for (std::size_t a = 0; a < s.transmitters.size(); ++a)
        for (std::size_t b = a + 1; b < s.transmitters.size(); ++b)
          CHECK(distance(s.transmitters[a].true_position,
                         s.transmitters[b].true_position) >= 25.0);
    }
  }

  SUBCASE("empty choice set is a configuration error") {
    SceneConfig cfg;
    cfg.count_choices.clear();
    RngStream rng(9);
    CHECK_THROWS_AS(generate_scene(rng, cfg), std::invalid_argument);
  }
}

TEST_CASE("frame dump round trip and dataset determinism") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "owmon_sensor_test";
  fs::remove_all(dir);
  fs::create_directories(dir);

  SUBCASE("write/read round trip is exact") {
    const SensorConfig sensor = SensorConfig::centered(16, 12, 0.03, 0.03, 0.03);
    Scene scene = single_tx_scene({10.0, 20.0});
    AcquisitionConfig acq;
    RngStream rng(13);
    const Frame frame = render_frame(scene, {}, {}, sensor, acq, rng);
    write_frame(frame, dir / "frame.owfr");
    const Frame back = read_frame(dir / "frame.owfr");
    CHECK(back.sensor.nx == 16);
    CHECK(back.sensor.ny == 12);
    CHECK(back.pixels == frame.pixels);
  }

  SUBCASE("same seed gives byte-identical datasets, different seeds differ") {
    SceneConfig cfg;
    const SensorConfig sensor = SensorConfig::centered(16, 16, 0.03, 0.03, 0.03);
    AcquisitionConfig acq;
    export_dataset(10, cfg, {}, {}, sensor, acq, {}, 42, dir / "a", 2);
    export_dataset(10, cfg, {}, {}, sensor, acq, {}, 42, dir / "b", 4);
    export_dataset(10, cfg, {}, {}, sensor, acq, {}, 43, dir / "c", 2);
    for (int i = 0; i < 10; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%06d.owfr", i);
      CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
    }
    CHECK(slurp(dir / "a" / "truth.csv") == slurp(dir / "b" / "truth.csv"));
    CHECK(slurp(dir / "a" / "frame_000000.owfr") !=
          slurp(dir / "c" / "frame_000000.owfr"));

    // Round-trip read matches the in-memory frames exactly.
    RngStream stream = RngStream::derive(42, {0});
    Scene scene = generate_scene(stream, cfg);
    scene.id = 0;
    const Frame in_memory =
        render_frame(scene, {}, {}, sensor, acq, stream, {});
    CHECK(read_frame(dir / "a" / "frame_000000.owfr").pixels == in_memory.pixels);
  }

  fs::remove_all(dir);
}
