#pragma once
#include "owmon/rng.hpp"
#include "owmon/vec.hpp"

namespace owmon {

/// Gamma-Gamma turbulence shape parameters (large- and small-scale cell
/// counts). The fade they generate has unit mean.
struct TurbulenceParams {
  double alpha = 4.0;
  double beta = 2.0;

  void validate() const;
};

/// Monitoring lens and sensor-chain constants.
struct LensConfig {
  double radius_ra = 0.05;           // lens radius [m]
  double transmission_tau = 0.9;     // optical transmission, (0,1]
  double focal_length_f = 0.03;      // [m]
  double sensor_efficiency_eta_s = 0.9;
  double sigma_diff0 = 0.008;        // diffraction core std at focus [m]
  double sigma_sens = 0.0;           // sensor blur std [m]

  double aperture_diameter() const { return 2.0 * radius_ra; }
  void validate() const;
};

/// Transmitter beam as seen at the lens plane.
struct BeamParams {
  double tx_power = 1.0;           // [W]
  double beam_radius_wz = 0.6;     // Gaussian beam radius at link distance [m]
  double jitter_mu = 0.0;          // per-axis boresight offset mean [m]
  double jitter_sigma = 0.1;       // per-axis jitter std [m]
  double attenuation_kappa = 0.001;  // [1/m]

  void validate() const;
};

/// Ground-to-lens link geometry with derived angles and path length.
struct LinkGeometry {
  Vec2 ground_position;
  double uav_altitude = 0.0;
  double link_length = 0.0;
  Vec2 angles;               // (theta_x, theta_y) [rad]
  double incidence_angle = 0.0;  // sqrt(theta_x^2 + theta_y^2)

  static LinkGeometry from_ground(Vec2 position, double altitude);
};

/// Draws one turbulence fade as the product of two independent unit-mean
/// Gamma variates with shapes alpha and beta. E[fade] = 1.
double sample_turbulence(const TurbulenceParams& params, RngStream& rng);

/// Gamma-Gamma probability density at rho > 0.
double turbulence_density(double rho, const TurbulenceParams& params);

/// Homogeneous-attenuation path gain exp(-kappa * length), in (0,1].
double path_gain(double kappa, double length);

/// Irradiance of the jitter-shifted Gaussian beam at point r on the lens
/// plane [W/m^2].
double irradiance_at(Vec2 r, const BeamParams& beam, Vec2 offset,
                     double fade, double gain);

/// Total optical power collected by the lens under the flat-field
/// approximation, including the incidence-cosine projection [W].
double collected_power(const BeamParams& beam, const LinkGeometry& geom,
                       const LensConfig& lens, Vec2 offset, double fade);

/// Maps incident angles to the sensor plane at axial position z:
/// (z tan(theta_x), z tan(theta_y)).
Vec2 angle_to_sensor(Vec2 theta, double z);

/// Per-axis field-of-view half angles admitted by a sensor of the given
/// half widths at axial position z.
Vec2 fov_limits(Vec2 sensor_half_widths, double z);

/// On-sensor blur decomposition at axial position z in (0, f].
struct BlurSigmas {
  double sigma_def = 0.0;   // geometric defocus component [m]
  double sigma_diff = 0.0;  // magnification-scaled diffraction core [m]
  double sigma_eff = 0.0;   // total effective spot std [m]
};

BlurSigmas blur_sigma_eff(const LensConfig& lens, double z);

}  // namespace owmon
