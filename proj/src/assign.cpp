#include "owmon/assign.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace owmon {

namespace {

void check_costs(const CostMatrix& cost) {
  if (cost.rows <= 0 || cost.cols <= 0)
    throw std::invalid_argument("cost matrix must be nonempty");
  if (cost.values.size() !=
      static_cast<std::size_t>(cost.rows) * static_cast<std::size_t>(cost.cols))
    throw std::invalid_argument("cost matrix storage does not match dimensions");
  for (double v : cost.values) {
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument("cost entries must be finite and >= 0");
  }
}

/// Kuhn-Munkres on an n x n matrix via dual potentials and augmenting paths.
/// Scans columns in ascending order, so ties resolve to the lowest index.
/// Returns row -> column.
std::vector<int> solve_square(const CostMatrix& cost) {
  const int n = cost.rows;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> match(static_cast<std::size_t>(n) + 1, 0);  // column -> row
  std::vector<int> path(static_cast<std::size_t>(n) + 1, 0);

  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> min_reduced(static_cast<std::size_t>(n) + 1, kInf);
    std::vector<char> visited(static_cast<std::size_t>(n) + 1, 0);
    do {
      visited[static_cast<std::size_t>(j0)] = 1;
      const int i0 = match[static_cast<std::size_t>(j0)];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (visited[static_cast<std::size_t>(j)]) continue;
        const double reduced = cost.at(i0 - 1, j - 1) -
                               u[static_cast<std::size_t>(i0)] -
                               v[static_cast<std::size_t>(j)];
        if (reduced < min_reduced[static_cast<std::size_t>(j)]) {
          min_reduced[static_cast<std::size_t>(j)] = reduced;
          path[static_cast<std::size_t>(j)] = j0;
        }
        if (min_reduced[static_cast<std::size_t>(j)] < delta) {
          delta = min_reduced[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (visited[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          min_reduced[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);

    // Augment along the alternating path.
    do {
      const int j1 = path[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (match[static_cast<std::size_t>(j)] != 0)
      row_to_col[static_cast<std::size_t>(match[static_cast<std::size_t>(j)]) - 1] = j - 1;
  return row_to_col;
}

void check_partial_matching(const AssignmentResult& result, int rows, int cols) {
  std::vector<char> ref_seen(static_cast<std::size_t>(rows), 0);
  std::vector<char> det_seen(static_cast<std::size_t>(cols), 0);
  auto mark = [](std::vector<char>& seen, int idx) {
    if (idx < 0 || idx >= static_cast<int>(seen.size()) || seen[static_cast<std::size_t>(idx)])
      throw std::logic_error("assignment is not a valid partial matching");
    seen[static_cast<std::size_t>(idx)] = 1;
  };
  for (const auto& [i, j] : result.pairs) {
    mark(ref_seen, i);
    mark(det_seen, j);
  }
  for (int i : result.unassigned_refs) mark(ref_seen, i);
  for (int j : result.unassigned_dets) mark(det_seen, j);
  for (char s : ref_seen)
    if (!s) throw std::logic_error("assignment misses a reference index");
  for (char s : det_seen)
    if (!s) throw std::logic_error("assignment misses a detection index");
}

}  // namespace

CostMatrix euclidean_cost(std::span<const Vec2> refs, std::span<const Vec2> dets) {
  if (refs.empty() || dets.empty())
    throw std::invalid_argument("cost matrix needs nonempty point lists");
  CostMatrix cost;
  cost.rows = static_cast<int>(refs.size());
  cost.cols = static_cast<int>(dets.size());
  cost.metric = CostMetric::euclidean;
  cost.values.resize(refs.size() * dets.size());
  for (int i = 0; i < cost.rows; ++i)
    for (int j = 0; j < cost.cols; ++j)
      cost.at(i, j) = distance(refs[static_cast<std::size_t>(i)],
                               dets[static_cast<std::size_t>(j)]);
  return cost;
}

CostMatrix mahalanobis_cost(std::span<const Vec2> refs,
                            std::span<const Vec2> dets,
                            std::span<const Cov2> ref_covariances) {
  if (refs.empty() || dets.empty())
    throw std::invalid_argument("cost matrix needs nonempty point lists");
  if (ref_covariances.size() != refs.size())
    throw std::invalid_argument("one covariance per reference required");
  for (const Cov2& c : ref_covariances)
    if (!c.spd())
      throw std::domain_error("covariances must be symmetric positive definite");

  CostMatrix cost;
  cost.rows = static_cast<int>(refs.size());
  cost.cols = static_cast<int>(dets.size());
  cost.metric = CostMetric::mahalanobis;
  cost.values.resize(refs.size() * dets.size());
  for (int i = 0; i < cost.rows; ++i) {
    const Cov2& sigma = ref_covariances[static_cast<std::size_t>(i)];
    for (int j = 0; j < cost.cols; ++j) {
      const Vec2 d = refs[static_cast<std::size_t>(i)] -
                     dets[static_cast<std::size_t>(j)];
      cost.at(i, j) = std::sqrt(sigma.inv_quadratic(d));
    }
  }
  return cost;
}

AssignmentResult solve_lap(const CostMatrix& cost) {
  check_costs(cost);
  if (cost.rows != cost.cols)
    throw std::invalid_argument("solve_lap needs a square matrix; use solve_lap_rect");

  const auto row_to_col = solve_square(cost);
  AssignmentResult result;
  result.pairs.reserve(static_cast<std::size_t>(cost.rows));
  for (int i = 0; i < cost.rows; ++i) {
    const int j = row_to_col[static_cast<std::size_t>(i)];
    result.pairs.emplace_back(i, j);
    result.total_cost += cost.at(i, j);
  }
  check_partial_matching(result, cost.rows, cost.cols);
  return result;
}

AssignmentResult solve_lap_rect(const CostMatrix& cost, double penalty_cmax) {
  if (!(penalty_cmax > 0.0))
    throw std::invalid_argument("penalty_cmax must be > 0");

  const int n = cost.rows;
  const int m = cost.cols;
  if (n < 0 || m < 0)
    throw std::invalid_argument("cost matrix dimensions must be >= 0");

  // An empty side leaves everything on the other side unassigned.
  if (n == 0 || m == 0) {
    AssignmentResult result;
    for (int i = 0; i < n; ++i) result.unassigned_refs.push_back(i);
    for (int j = 0; j < m; ++j) result.unassigned_dets.push_back(j);
    result.total_cost = penalty_cmax * (n + m);
    check_partial_matching(result, n, m);
    return result;
  }
  check_costs(cost);

  const int size = n + m;

  CostMatrix padded;
  padded.rows = size;
  padded.cols = size;
  padded.values.assign(static_cast<std::size_t>(size) * size, 0.0);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const bool real_ref = i < n;
      const bool real_det = j < m;
      if (real_ref && real_det)
        padded.at(i, j) = cost.at(i, j);
      else if (real_ref != real_det)
        padded.at(i, j) = penalty_cmax;
      // dummy-dummy stays zero
    }
  }

  const auto row_to_col = solve_square(padded);
  AssignmentResult result;
  for (int i = 0; i < n; ++i) {
    const int j = row_to_col[static_cast<std::size_t>(i)];
    if (j < m) {
      result.pairs.emplace_back(i, j);
      result.total_cost += cost.at(i, j);
    } else {
      result.unassigned_refs.push_back(i);
      result.total_cost += penalty_cmax;
    }
  }
  std::vector<char> det_matched(static_cast<std::size_t>(m), 0);
  for (const auto& [i, j] : result.pairs) det_matched[static_cast<std::size_t>(j)] = 1;
  for (int j = 0; j < m; ++j) {
    if (!det_matched[static_cast<std::size_t>(j)]) {
      result.unassigned_dets.push_back(j);
      result.total_cost += penalty_cmax;
    }
  }
  check_partial_matching(result, n, m);
  return result;
}

}  // namespace owmon
