#pragma once
#include <optional>
#include <span>
#include <vector>

#include "owmon/assign.hpp"
#include "owmon/vec.hpp"

namespace owmon {

/// Incident angles recovered from a sensor-plane centroid at axial
/// position z: (arctan(x/z), arctan(y/z)).
Vec2 invert_to_angles(Vec2 centroid, double z);

/// Ground position from incident angles at altitude hu:
/// hu * (tan theta_x, tan theta_y).
Vec2 reconstruct_ground(Vec2 angles, double hu);

/// One reconstructed transmitter with its provenance on the sensor plane.
struct GroundEstimate {
  Vec2 position;
  Vec2 source_centroid;
  Vec2 angles;
  std::optional<int> matched_claim;
  bool anomaly = false;
};

GroundEstimate ground_estimate_from_centroid(Vec2 centroid, double z, double hu);
GroundEstimate ground_estimate_from_position(Vec2 position, double z, double hu);

/// Slant length of the estimated link, hu / cos(polar angle). Derived
/// convenience only; lateral position is the primary output.
double estimated_link_length(const GroundEstimate& estimate, double hu);

/// Localization error summary over an assignment between estimates and
/// truths. Unmatched truths are excluded from the MSE and counted instead.
struct PositionErrorStats {
  std::optional<double> mse_m2;
  int matched = 0;
  int unmatched_truths = 0;
  int unmatched_estimates = 0;
};

/// Mean squared ground distance over matched pairs. The assignment's
/// reference side indexes `truths`, the detection side `estimates`.
PositionErrorStats mse_position(std::span<const Vec2> estimates,
                                std::span<const Vec2> truths,
                                const AssignmentResult& assignment);

/// A position a legitimate user reported to the network.
struct Claim {
  int id = 0;
  Vec2 position;
};

struct AnomalyReport {
  std::vector<GroundEstimate> estimates;  // matched_claim/anomaly filled in
  std::vector<int> missing_claim_ids;     // claims no estimate accounts for
};

/// Matches estimates against claimed positions with a gated assignment
/// (c_max = gate_radius). Estimates left unmatched are flagged as anomalies
/// (candidate eavesdroppers); unmatched claims are reported missing.
AnomalyReport flag_anomalies(std::vector<GroundEstimate> estimates,
                             const std::vector<Claim>& claims,
                             double gate_radius);

}  // namespace owmon
