#pragma once
#include <cmath>

namespace owmon {

/// 2-D point / offset on the ground or sensor plane, in meters.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }

  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm2() const { return x * x + y * y; }
  double norm() const { return std::sqrt(norm2()); }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

/// Symmetric 2x2 covariance matrix.
struct Cov2 {
  double xx = 1.0;
  double xy = 0.0;
  double yy = 1.0;

  double det() const { return xx * yy - xy * xy; }
  bool spd() const { return xx > 0.0 && det() > 0.0; }

  /// Quadratic form v^T C^{-1} v. Caller must check spd() first.
  double inv_quadratic(Vec2 v) const {
    const double d = det();
    return (yy * v.x * v.x - 2.0 * xy * v.x * v.y + xx * v.y * v.y) / d;
  }

  static Cov2 isotropic(double variance) { return {variance, 0.0, variance}; }
};

}  // namespace owmon
