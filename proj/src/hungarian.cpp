#include "spinegnn/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spinegnn/error.hpp"

namespace spinegnn::baselines {

namespace {

// Rows <= cols. Shortest augmenting paths with row/column potentials; 1-based internally with
// column 0 as the virtual source.
std::vector<int> solve_rows_le_cols(const Matrix& c) {
  const std::size_t n = c.rows;
  const std::size_t m = c.cols;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
  }
  return row_to_col;
}

}  // namespace

std::vector<std::pair<int, int>> hungarian(const Matrix& cost) {
  if (cost.rows == 0 || cost.cols == 0) return {};
  for (double x : cost.data) {
    if (!std::isfinite(x)) throw ConfigError("hungarian: cost matrix has non-finite entries");
  }
  std::vector<std::pair<int, int>> out;
  if (cost.rows <= cost.cols) {
    const auto r2c = solve_rows_le_cols(cost);
    for (std::size_t i = 0; i < r2c.size(); ++i) out.emplace_back(static_cast<int>(i), r2c[i]);
  } else {
    const auto c2r = solve_rows_le_cols(cost.transposed());
    for (std::size_t j = 0; j < c2r.size(); ++j) out.emplace_back(c2r[j], static_cast<int>(j));
    std::sort(out.begin(), out.end());
  }
  return out;
}

double assignment_cost(const Matrix& cost, const std::vector<std::pair<int, int>>& assignment) {
  double total = 0.0;
  for (const auto& [r, c] : assignment) total += cost(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  return total;
}

std::vector<std::pair<int, int>> associate_by_matching(const std::vector<Keypoint>& keypoints,
                                                       double max_distance_mm) {
  std::vector<int> bodies, left, right;
  for (std::size_t i = 0; i < keypoints.size(); ++i) {
    switch (keypoints[i].kind) {
      case KeypointType::body: bodies.push_back(static_cast<int>(i)); break;
      case KeypointType::left_pedicle: left.push_back(static_cast<int>(i)); break;
      case KeypointType::right_pedicle: right.push_back(static_cast<int>(i)); break;
    }
  }
  std::vector<std::pair<int, int>> edges;
  for (const std::vector<int>* side : {&left, &right}) {
    Matrix cost(bodies.size(), side->size());
    for (std::size_t b = 0; b < bodies.size(); ++b) {
      for (std::size_t p = 0; p < side->size(); ++p) {
        cost(b, p) = distance(keypoints[static_cast<std::size_t>(bodies[b])].position,
                              keypoints[static_cast<std::size_t>((*side)[p])].position);
      }
    }
    for (const auto& [b, p] : hungarian(cost)) {
      if (cost(static_cast<std::size_t>(b), static_cast<std::size_t>(p)) > max_distance_mm) continue;
      const int bi = bodies[static_cast<std::size_t>(b)];
      const int pi = (*side)[static_cast<std::size_t>(p)];
      edges.emplace_back(std::min(bi, pi), std::max(bi, pi));
    }
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

}  // namespace spinegnn::baselines
