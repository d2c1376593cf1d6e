#include "owmon/optics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace owmon {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void TurbulenceParams::validate() const {
  require(alpha > 0.0, "turbulence alpha must be > 0");
  require(beta > 0.0, "turbulence beta must be > 0");
}

void LensConfig::validate() const {
  require(radius_ra > 0.0, "lens radius must be > 0");
  require(transmission_tau > 0.0 && transmission_tau <= 1.0,
          "lens transmission must be in (0,1]");
  require(focal_length_f > 0.0, "focal length must be > 0");
  require(sensor_efficiency_eta_s > 0.0 && sensor_efficiency_eta_s <= 1.0,
          "sensor efficiency must be in (0,1]");
  require(sigma_diff0 >= 0.0, "sigma_diff0 must be >= 0");
  require(sigma_sens >= 0.0, "sigma_sens must be >= 0");
}

void BeamParams::validate() const {
  require(tx_power > 0.0, "beam power must be > 0");
  require(beam_radius_wz > 0.0, "beam radius must be > 0");
  require(jitter_sigma >= 0.0, "jitter sigma must be >= 0");
  require(attenuation_kappa >= 0.0, "attenuation must be >= 0");
}

LinkGeometry LinkGeometry::from_ground(Vec2 position, double altitude) {
  if (altitude <= 0.0) throw std::invalid_argument("altitude must be > 0");
  LinkGeometry g;
  g.ground_position = position;
  g.uav_altitude = altitude;
  g.link_length = std::sqrt(altitude * altitude + position.norm2());
  g.angles = {std::atan(position.x / altitude), std::atan(position.y / altitude)};
  g.incidence_angle = g.angles.norm();
  return g;
}

double sample_turbulence(const TurbulenceParams& params, RngStream& rng) {
  params.validate();
  // Unit-mean construction: Gamma(alpha, 1/alpha) * Gamma(beta, 1/beta).
  const double large = rng.gamma(params.alpha, 1.0 / params.alpha);
  const double small = rng.gamma(params.beta, 1.0 / params.beta);
  return large * small;
}

double turbulence_density(double rho, const TurbulenceParams& params) {
  params.validate();
  if (rho <= 0.0) throw std::domain_error("turbulence density needs rho > 0");
  const double a = params.alpha;
  const double b = params.beta;
  // Prefactor in log space; Gamma(alpha)*Gamma(beta) overflows early.
  const double log_pre = std::log(2.0) + 0.5 * (a + b) * std::log(a * b) -
                         std::lgamma(a) - std::lgamma(b) +
                         (0.5 * (a + b) - 1.0) * std::log(rho);
  const double bessel =
      std::cyl_bessel_k(std::abs(a - b), 2.0 * std::sqrt(a * b * rho));
  return std::exp(log_pre) * bessel;
}

double path_gain(double kappa, double length) {
  if (kappa < 0.0) throw std::domain_error("attenuation must be >= 0");
  if (length < 0.0) throw std::domain_error("path length must be >= 0");
  return std::exp(-kappa * length);
}

double irradiance_at(Vec2 r, const BeamParams& beam, Vec2 offset,
                     double fade, double gain) {
  const double wz2 = beam.beam_radius_wz * beam.beam_radius_wz;
  const double peak = 2.0 * beam.tx_power / (M_PI * wz2);
  return fade * gain * peak * std::exp(-2.0 * (r - offset).norm2() / wz2);
}

double collected_power(const BeamParams& beam, const LinkGeometry& geom,
                       const LensConfig& lens, Vec2 offset, double fade) {
  const double gain = path_gain(beam.attenuation_kappa, geom.link_length);
  // Flat-field irradiance: the beam evaluated at the lens center.
  const double flat = irradiance_at({0.0, 0.0}, beam, offset, fade, gain);
  const double area = M_PI * lens.radius_ra * lens.radius_ra;
  return lens.transmission_tau * flat * area * std::cos(geom.incidence_angle);
}

Vec2 angle_to_sensor(Vec2 theta, double z) {
  if (z <= 0.0) throw std::domain_error("sensor plane distance must be > 0");
  if (std::abs(theta.x) >= M_PI / 2.0 || std::abs(theta.y) >= M_PI / 2.0)
    throw std::domain_error("incident angle outside (-pi/2, pi/2)");
  return {z * std::tan(theta.x), z * std::tan(theta.y)};
}

Vec2 fov_limits(Vec2 sensor_half_widths, double z) {
  if (z <= 0.0) throw std::domain_error("sensor plane distance must be > 0");
  if (sensor_half_widths.x <= 0.0 || sensor_half_widths.y <= 0.0)
    throw std::domain_error("sensor half widths must be > 0");
  return {std::atan(sensor_half_widths.x / z),
          std::atan(sensor_half_widths.y / z)};
}

BlurSigmas blur_sigma_eff(const LensConfig& lens, double z) {
  if (z <= 0.0 || z > lens.focal_length_f)
    throw std::domain_error("sensor plane must lie in (0, focal length]");
  BlurSigmas s;
  const double d_geo = 2.0 * lens.radius_ra * std::abs(1.0 - z / lens.focal_length_f);
  s.sigma_def = d_geo / 4.0;
  s.sigma_diff = (z / lens.focal_length_f) * lens.sigma_diff0;
  s.sigma_eff = std::sqrt(s.sigma_def * s.sigma_def +
                          s.sigma_diff * s.sigma_diff +
                          lens.sigma_sens * lens.sigma_sens);
  return s;
}

}  // namespace owmon
