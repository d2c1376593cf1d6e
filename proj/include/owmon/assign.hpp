#pragma once
#include <span>
#include <utility>
#include <vector>

#include "owmon/vec.hpp"

namespace owmon {

enum class CostMetric { euclidean, mahalanobis };

/// Dense nonnegative cost matrix; rows index references, columns detections.
struct CostMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;  // row-major
  CostMetric metric = CostMetric::euclidean;

  double& at(int i, int j) { return values[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * cols + j]; }
};

/// D_ij = ||refs[i] - dets[j]||_2.
CostMatrix euclidean_cost(std::span<const Vec2> refs, std::span<const Vec2> dets);

/// D_ij = sqrt((refs[i]-dets[j])^T Sigma_i^{-1} (refs[i]-dets[j])), with one
/// SPD covariance per reference.
CostMatrix mahalanobis_cost(std::span<const Vec2> refs,
                            std::span<const Vec2> dets,
                            std::span<const Cov2> ref_covariances);

/// One-to-one correspondence between references and detections. `pairs` is
/// sorted by reference index; together with the unassigned lists it covers
/// every index on each side exactly once.
struct AssignmentResult {
  std::vector<std::pair<int, int>> pairs;  // (ref index, det index)
  std::vector<int> unassigned_refs;
  std::vector<int> unassigned_dets;
  double total_cost = 0.0;
};

/// Exact global minimum-cost perfect matching on a square cost matrix
/// (Kuhn-Munkres with potentials, O(n^3)). Equal-cost optima resolve to the
/// lowest (ref, det) index pairing by scan order.
AssignmentResult solve_lap(const CostMatrix& cost);

/// Rectangular/outlier-tolerant variant: both sides are augmented with dummy
/// nodes of cost penalty_cmax (dummy-dummy pairs cost zero), the padded
/// square problem is solved exactly, and real-to-dummy matches are reported
/// as unassigned. Unassigned real nodes each contribute penalty_cmax to the
/// total cost.
AssignmentResult solve_lap_rect(const CostMatrix& cost, double penalty_cmax);

}  // namespace owmon
