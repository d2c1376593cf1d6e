#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "owmon/optics.hpp"
#include "quadrature.hpp"

using testsupport::integrate;

using namespace owmon;


TEST_CASE("turbulence sampler has unit mean and the product variance") {
  TurbulenceParams params{4.0, 2.0};
  RngStream rng(42);
  const int n = 1'000'000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double rho = sample_turbulence(params, rng);
    CHECK(rho > 0.0);
    sum += rho;
    sum_sq += rho * rho;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(mean == doctest::Approx(1.0).epsilon(0.01));
  // Var = (1 + 1/alpha)(1 + 1/beta) - 1 for independent unit-mean factors.
  CHECK(var == doctest::Approx(0.875).epsilon(0.05));
}

TEST_CASE("turbulence sampler collapses to 1 in the large-shape limit") {
  TurbulenceParams params{1e6, 1e6};
  RngStream rng(7);
  for (int i = 0; i < 10'000; ++i)
    CHECK(std::abs(sample_turbulence(params, rng) - 1.0) < 0.01);
}

TEST_CASE("turbulence sampler rejects bad shapes") {
  RngStream rng(1);
  CHECK_THROWS_AS(sample_turbulence({0.0, 2.0}, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_turbulence({4.0, -1.0}, rng), std::invalid_argument);
}

TEST_CASE("turbulence density integrates to one") {
  for (const TurbulenceParams params :
       {TurbulenceParams{4.0, 2.0}, TurbulenceParams{2.0, 2.0},
        TurbulenceParams{8.0, 4.0}}) {
    const double mass = integrate(
        [&](double rho) {
          return rho <= 0.0 ? 0.0 : turbulence_density(rho, params);
        },
        1e-9, 50.0);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("turbulence density is nonnegative and rejects rho <= 0") {
  TurbulenceParams params{4.0, 2.0};
  RngStream rng(3);
  for (int i = 0; i < 1000; ++i)
    CHECK(turbulence_density(rng.uniform(1e-6, 20.0), params) >= 0.0);
  CHECK_THROWS_AS(turbulence_density(0.0, params), std::domain_error);
  CHECK_THROWS_AS(turbulence_density(-1.0, params), std::domain_error);
}

TEST_CASE("sampler histogram matches the density") {
  TurbulenceParams params{4.0, 2.0};
  RngStream rng(2024);
  const int n = 1'000'000;
  const int bins = 50;
  const double hi = 6.0;
  std::vector<long> counts(bins + 1, 0);
  for (int i = 0; i < n; ++i) {
    const double rho = sample_turbulence(params, rng);
    const int b = rho >= hi ? bins : static_cast<int>(rho / hi * bins);
    ++counts[static_cast<std::size_t>(b)];
  }
  double chi2 = 0.0;
  int used = 0;
  double cdf = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double lo_edge = std::max(1e-12, b * hi / bins);
    const double hi_edge = (b + 1) * hi / bins;
    const double p = integrate(
        [&](double rho) { return turbulence_density(rho, params); }, lo_edge,
        hi_edge, 1e-10);
    cdf += p;
    const double expected = n * p;
    if (expected < 10.0) continue;
    const double diff = counts[static_cast<std::size_t>(b)] - expected;
    chi2 += diff * diff / expected;
    ++used;
  }
  // Overflow bin.
  const double p_tail = 1.0 - cdf;
  if (n * p_tail >= 10.0) {
    const double diff = counts[static_cast<std::size_t>(bins)] - n * p_tail;
    chi2 += diff * diff / (n * p_tail);
    ++used;
  }
  REQUIRE(used >= 40);
  CHECK(chi2 / (used - 1) < 2.0);
}

TEST_CASE("path gain") {
  CHECK(path_gain(0.0, 300.0) == 1.0);
  CHECK(path_gain(0.001, 300.0) == doctest::Approx(0.740818).epsilon(1e-5));
  CHECK(path_gain(0.001, 0.0) == 1.0);
  CHECK_THROWS_AS(path_gain(-1e-3, 10.0), std::domain_error);
  CHECK_THROWS_AS(path_gain(1e-3, -10.0), std::domain_error);
}

TEST_CASE("irradiance profile") {
  BeamParams beam;
  beam.tx_power = 1.0;
  beam.beam_radius_wz = 0.6;

  const double peak = irradiance_at({0, 0}, beam, {0, 0}, 1.0, 1.0);
  CHECK(peak == doctest::Approx(2.0 / (M_PI * 0.36)).epsilon(1e-6));
  CHECK(peak == doctest::Approx(1.76839).epsilon(1e-4));

  const double at_wz = irradiance_at({0.6, 0.0}, beam, {0, 0}, 1.0, 1.0);
  CHECK(at_wz == doctest::Approx(peak * std::exp(-2.0)).epsilon(1e-9));
}

TEST_CASE("beam is approximately flat over the lens") {
  BeamParams beam;
  beam.beam_radius_wz = 0.6;
  const double r_a = 0.05;
  const double center = irradiance_at({0, 0}, beam, {0, 0}, 1.0, 1.0);
  const double rim = irradiance_at({r_a, 0.0}, beam, {0, 0}, 1.0, 1.0);
  CHECK(center / rim - 1.0 < 0.014);

  // First-order bound on the rim-to-center deviation for wz >= 5 r_a.
  for (double ratio : {5.0, 8.0, 12.0, 20.0}) {
    BeamParams b;
    b.beam_radius_wz = ratio * r_a;
    const double c = irradiance_at({0, 0}, b, {0, 0}, 1.0, 1.0);
    const double r = irradiance_at({r_a, 0.0}, b, {0, 0}, 1.0, 1.0);
    const double bound =
        2.0 * (2.0 * r_a * r_a / (b.beam_radius_wz * b.beam_radius_wz)) + 1e-3;
    CHECK(std::abs(c / r - 1.0) < bound);
  }
}

TEST_CASE("collected power matches the closed form") {
  BeamParams beam;
  beam.tx_power = 1.0;
  beam.beam_radius_wz = 0.6;
  beam.attenuation_kappa = 0.0;
  LensConfig lens;
  lens.radius_ra = 0.05;
  lens.transmission_tau = 0.9;

  LinkGeometry overhead = LinkGeometry::from_ground({0, 0}, 300.0);
  CHECK(collected_power(beam, overhead, lens, {0, 0}, 1.0) ==
        doctest::Approx(0.0125).epsilon(1e-9));

  // 60 degree incidence halves the projection.
  LinkGeometry oblique = overhead;
  oblique.incidence_angle = M_PI / 3.0;
  CHECK(collected_power(beam, oblique, lens, {0, 0}, 1.0) ==
        doctest::Approx(0.00625).epsilon(1e-9));

  const double shifted = collected_power(
      beam, overhead, lens, {0.6 / std::sqrt(2.0), 0.0}, 1.0);
  CHECK(shifted == doctest::Approx(0.0125 * std::exp(-1.0)).epsilon(1e-9));
}

TEST_CASE("collected power is linear in power and fade, monotone in offsets") {
  LensConfig lens;
  RngStream rng(5);
  for (int i = 0; i < 200; ++i) {
    BeamParams beam;
    beam.tx_power = rng.uniform(0.1, 5.0);
    beam.beam_radius_wz = rng.uniform(0.3, 1.5);
    beam.attenuation_kappa = rng.uniform(0.0, 0.01);
    const LinkGeometry geom = LinkGeometry::from_ground(
        {rng.uniform(-100, 100), rng.uniform(-100, 100)}, 300.0);
    const Vec2 offset{rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)};
    const double fade = rng.uniform(0.1, 3.0);
    const double base = collected_power(beam, geom, lens, offset, fade);

    BeamParams doubled = beam;
    doubled.tx_power *= 2.0;
    CHECK(collected_power(doubled, geom, lens, offset, fade) ==
          doctest::Approx(2.0 * base).epsilon(1e-12));
    CHECK(collected_power(beam, geom, lens, offset, 2.0 * fade) ==
          doctest::Approx(2.0 * base).epsilon(1e-12));

    // Larger jitter offset never increases the power.
    const Vec2 farther = offset * 1.5;
    CHECK(collected_power(beam, geom, lens, farther, fade) <= base + 1e-18);

    LinkGeometry steeper = geom;
    steeper.incidence_angle = std::min(M_PI / 2.0 - 1e-6,
                                       geom.incidence_angle + 0.3);
    CHECK(collected_power(beam, steeper, lens, offset, fade) <= base + 1e-18);
  }
}

TEST_CASE("angle to sensor mapping") {
  CHECK(angle_to_sensor({0, 0}, 0.01).x == 0.0);
  CHECK(angle_to_sensor({0, 0}, 0.01).y == 0.0);
  const Vec2 p = angle_to_sensor({std::atan(0.1), 0.0}, 0.03);
  CHECK(p.x == doctest::Approx(0.003).epsilon(1e-12));
  CHECK_THROWS_AS(angle_to_sensor({M_PI / 2.0, 0.0}, 0.03), std::domain_error);
  CHECK_THROWS_AS(angle_to_sensor({0.0, 0.0}, 0.0), std::domain_error);
}

TEST_CASE("field of view limits") {
  const Vec2 lim = fov_limits({0.015, 0.015}, 0.03);
  CHECK(lim.x == doctest::Approx(0.46365).epsilon(1e-4));
  CHECK(fov_limits({0.015, 0.015}, 0.02).x > lim.x);  // smaller z opens FoV
  CHECK(fov_limits({0.03, 0.03}, 0.03).x == doctest::Approx(M_PI / 4.0));
}

TEST_CASE("blur components") {
  LensConfig lens;
  lens.radius_ra = 0.05;
  lens.focal_length_f = 0.03;
  lens.sigma_diff0 = 0.008;
  lens.sigma_sens = 0.0;

  SUBCASE("in focus only the diffraction core and sensor blur remain") {
    const BlurSigmas s = blur_sigma_eff(lens, lens.focal_length_f);
    CHECK(s.sigma_def == 0.0);
    CHECK(s.sigma_eff == doctest::Approx(0.008).epsilon(1e-12));

    LensConfig with_sens = lens;
    with_sens.sigma_sens = 0.006;
    const BlurSigmas t = blur_sigma_eff(with_sens, lens.focal_length_f);
    CHECK(t.sigma_eff == doctest::Approx(std::sqrt(0.008 * 0.008 + 0.006 * 0.006)));
  }

  SUBCASE("defocus grows as D dz / (4 f)") {
    const BlurSigmas s = blur_sigma_eff(lens, 0.027);  // dz = 3 mm
    CHECK(s.sigma_def == doctest::Approx(0.0025).epsilon(1e-12));
  }

  SUBCASE("pure defocus at half focal distance") {
    LensConfig pure = lens;
    pure.sigma_diff0 = 0.0;
    const BlurSigmas s = blur_sigma_eff(pure, lens.focal_length_f / 2.0);
    // d_geo = r_a, so sigma = r_a / 4.
    CHECK(s.sigma_eff == doctest::Approx(lens.radius_ra / 4.0).epsilon(1e-12));
    CHECK(s.sigma_eff == s.sigma_def);
  }

  SUBCASE("sigma_eff never drops below the sensor blur") {
    LensConfig l = lens;
    l.sigma_sens = 0.004;
    for (double z : {0.003, 0.01, 0.02, 0.029, 0.03})
      CHECK(blur_sigma_eff(l, z).sigma_eff >= l.sigma_sens);
  }

  SUBCASE("sigma_eff is continuous in the plane position") {
    double prev = blur_sigma_eff(lens, 1e-4).sigma_eff;
    for (double z = 2e-4; z <= lens.focal_length_f; z += 1e-4) {
      const double cur = blur_sigma_eff(lens, z).sigma_eff;
      CHECK(std::abs(cur - prev) < 1e-3);
      prev = cur;
    }
  }

  SUBCASE("domain errors") {
    CHECK_THROWS_AS(blur_sigma_eff(lens, 0.0), std::domain_error);
    CHECK_THROWS_AS(blur_sigma_eff(lens, 0.031), std::domain_error);
  }
}

TEST_CASE("composite-angle cosine stays within 3% of the exact polar cosine") {
  // The projection uses cos(sqrt(tx^2 + ty^2)); the exact polar cosine is
  // h_u / L. Over a 250x250 m area at 300 m altitude they agree to < 3%.
  RngStream rng(12);
  double worst = 0.0;
  for (int i = 0; i < 5000; ++i) {
    const Vec2 p{rng.uniform(-125.0, 125.0), rng.uniform(-125.0, 125.0)};
    const LinkGeometry g = LinkGeometry::from_ground(p, 300.0);
    const double composite = std::cos(g.incidence_angle);
    const double exact = g.uav_altitude / g.link_length;
    worst = std::max(worst, std::abs(composite - exact) / exact);
  }
  CHECK(worst < 0.03);
}
