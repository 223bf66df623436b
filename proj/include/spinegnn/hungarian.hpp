#pragma once

#include <utility>
#include <vector>

#include "spinegnn/matrix.hpp"
#include "spinegnn/spine.hpp"

namespace spinegnn::baselines {

/// Minimum-cost assignment for an n x m cost matrix (Kuhn-Munkres with potentials, O(n^2 m)).
/// Rectangular inputs assign min(n, m) pairs. Returns (row, col) pairs sorted by row; an empty
/// matrix gives an empty assignment. Throws ConfigError for non-finite costs.
std::vector<std::pair<int, int>> hungarian(const Matrix& cost);

/// Sum of cost(row, col) over the assignment, accumulated in row order.
double assignment_cost(const Matrix& cost, const std::vector<std::pair<int, int>>& assignment);

inline constexpr double kDefaultMatchingDistanceMm = 40.0;

/// Body-pedicle association baseline: one Euclidean matching of bodies to left pedicles and one
/// to right pedicles; matched pairs farther apart than `max_distance_mm` are dropped. Indices
/// refer to `keypoints`; pairs are returned as (min, max).
std::vector<std::pair<int, int>> associate_by_matching(const std::vector<Keypoint>& keypoints,
                                                       double max_distance_mm = kDefaultMatchingDistanceMm);

}  // namespace spinegnn::baselines
