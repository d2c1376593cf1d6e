#include "owmon/geom.hpp"

#include <cmath>
#include <stdexcept>

namespace owmon {

Vec2 invert_to_angles(Vec2 centroid, double z) {
  if (z <= 0.0) throw std::domain_error("sensor plane distance must be > 0");
  return {std::atan(centroid.x / z), std::atan(centroid.y / z)};
}

Vec2 reconstruct_ground(Vec2 angles, double hu) {
  if (hu <= 0.0) throw std::domain_error("altitude must be > 0");
  if (std::abs(angles.x) >= M_PI / 2.0 || std::abs(angles.y) >= M_PI / 2.0)
    throw std::domain_error("angles outside (-pi/2, pi/2)");
  return {hu * std::tan(angles.x), hu * std::tan(angles.y)};
}

GroundEstimate ground_estimate_from_centroid(Vec2 centroid, double z, double hu) {
  GroundEstimate e;
  e.source_centroid = centroid;
  e.angles = invert_to_angles(centroid, z);
  e.position = reconstruct_ground(e.angles, hu);
  return e;
}

GroundEstimate ground_estimate_from_position(Vec2 position, double z, double hu) {
  if (hu <= 0.0) throw std::domain_error("altitude must be > 0");
  GroundEstimate e;
  e.position = position;
  e.angles = {std::atan(position.x / hu), std::atan(position.y / hu)};
  e.source_centroid = {z * std::tan(e.angles.x), z * std::tan(e.angles.y)};
  return e;
}

double estimated_link_length(const GroundEstimate& estimate, double hu) {
  if (hu <= 0.0) throw std::domain_error("altitude must be > 0");
  return std::sqrt(hu * hu + estimate.position.norm2());
}

PositionErrorStats mse_position(std::span<const Vec2> estimates,
                                std::span<const Vec2> truths,
                                const AssignmentResult& assignment) {
  PositionErrorStats stats;
  double sum_sq = 0.0;
  for (const auto& [ti, ei] : assignment.pairs) {
    if (ti < 0 || ti >= static_cast<int>(truths.size()) || ei < 0 ||
        ei >= static_cast<int>(estimates.size()))
      throw std::out_of_range("assignment indexes outside the point lists");
    const Vec2 d = estimates[static_cast<std::size_t>(ei)] -
                   truths[static_cast<std::size_t>(ti)];
    sum_sq += d.norm2();
    ++stats.matched;
  }
  stats.unmatched_truths = static_cast<int>(assignment.unassigned_refs.size());
  stats.unmatched_estimates = static_cast<int>(assignment.unassigned_dets.size());
  if (stats.matched > 0) stats.mse_m2 = sum_sq / stats.matched;
  return stats;
}

AnomalyReport flag_anomalies(std::vector<GroundEstimate> estimates,
                             const std::vector<Claim>& claims,
                             double gate_radius) {
  if (!(gate_radius > 0.0))
    throw std::invalid_argument("gate radius must be > 0");

  AnomalyReport report;
  for (auto& e : estimates) {
    e.matched_claim.reset();
    e.anomaly = true;
  }

  if (claims.empty() || estimates.empty()) {
    for (const Claim& c : claims) report.missing_claim_ids.push_back(c.id);
    report.estimates = std::move(estimates);
    return report;
  }

  std::vector<Vec2> claim_points;
  claim_points.reserve(claims.size());
  for (const Claim& c : claims) claim_points.push_back(c.position);
  std::vector<Vec2> est_points;
  est_points.reserve(estimates.size());
  for (const auto& e : estimates) est_points.push_back(e.position);

  const CostMatrix cost = euclidean_cost(claim_points, est_points);
  const AssignmentResult assignment = solve_lap_rect(cost, gate_radius);

  for (const auto& [ci, ei] : assignment.pairs) {
    estimates[static_cast<std::size_t>(ei)].matched_claim =
        claims[static_cast<std::size_t>(ci)].id;
    estimates[static_cast<std::size_t>(ei)].anomaly = false;
  }

  // An estimate the one-to-one matching left over can still sit inside the
  // gate of an already-claimed position (duplicate detection of one user).
  // That is an explained estimate, not an eavesdropper candidate: only
  // estimates farther than the gate from every claim stay flagged.
  for (int ei : assignment.unassigned_dets) {
    auto& e = estimates[static_cast<std::size_t>(ei)];
    double best = gate_radius;
    for (std::size_t ci = 0; ci < claims.size(); ++ci) {
      const double d = distance(e.position, claims[ci].position);
      if (d < best) {
        best = d;
        e.matched_claim = claims[ci].id;
        e.anomaly = false;
      }
    }
  }

  for (int ci : assignment.unassigned_refs)
    report.missing_claim_ids.push_back(claims[static_cast<std::size_t>(ci)].id);

  report.estimates = std::move(estimates);
  return report;
}

}  // namespace owmon
