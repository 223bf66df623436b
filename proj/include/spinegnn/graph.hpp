#pragma once

// k-NN keypoint graphs with node/edge input features and training targets.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spinegnn/matrix.hpp"
#include "spinegnn/spine.hpp"

namespace spinegnn {

inline constexpr std::size_t kNodeFeatureDim = 7;
inline constexpr std::size_t kEdgeFeatureDim = 4;
/// Edge-feature distances are expressed in decimetres.
inline constexpr double kEdgeDistanceUnitMm = 100.0;

struct SpineGraph {
  std::vector<Keypoint> nodes;
  /// Undirected adjacencies (a, b) with a < b, sorted.
  std::vector<std::pair<int, int>> undirected;
  /// directed[2i] = (a, b) and directed[2i + 1] = (b, a) for undirected[i] = (a, b).
  std::vector<std::pair<int, int>> directed;
  Matrix node_features;  // N x 7: one-hot kind | segment pseudo-probabilities
  Matrix edge_features;  // E x 4: unit direction u->v | distance in dm
  /// Per undirected edge: exactly one endpoint is a body.
  std::vector<std::uint8_t> edge_is_predictable;

  // Targets. level_target is -1 where no level target exists (non-bodies, illegitimate nodes).
  std::vector<int> level_target;
  std::vector<std::uint8_t> legit_target;
  std::vector<std::uint8_t> edge_target;  // per undirected edge

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_undirected() const { return undirected.size(); }
  std::size_t num_directed() const { return directed.size(); }
};

/// [unit direction from u to v | distance in dm]; coincident points give all zeros.
std::array<double, 4> compute_edge_feature(const Vec3& from, const Vec3& to);

std::array<double, kNodeFeatureDim> compute_node_feature(const Keypoint& kp);

/// Undirected k-nearest-neighbour edges (a < b, sorted, deduplicated). Ties in distance go to the
/// lower node index.
std::vector<std::pair<int, int>> knn_edges(std::span<const Vec3> points, int k);

/// Builds the featurised graph: k-NN edges, then, while the graph is disconnected, the closest
/// pair of nodes in different components is found and its lower-index endpoint is connected to
/// its ceil(k/3) nearest nodes outside its own component. Targets are left empty.
/// Throws ConfigError("graph underflow") for fewer than two keypoints, or for k < 1.
SpineGraph build_knn_graph(const std::vector<Keypoint>& keypoints, int k);

/// Fills targets from the ground truth the nodes were derived from (via source_id; nodes without
/// one use their own level). Edge target is 1 iff it joins a legitimate body and a legitimate
/// pedicle of the same level.
void assign_targets(SpineGraph& graph, const std::vector<Keypoint>& ground_truth);

/// build_knn_graph followed by assign_targets.
SpineGraph make_graph(const std::vector<Keypoint>& keypoints,
                      const std::vector<Keypoint>& ground_truth, int k);

/// Number of connected components of the undirected graph.
std::size_t count_components(std::size_t num_nodes, std::span<const std::pair<int, int>> edges);

/// Disjoint union: node indices of later graphs are offset; message passing cannot cross parts.
SpineGraph disjoint_union(std::span<const SpineGraph* const> graphs);

/// Relabels node i as perm[i]. Edge order and orientation are kept.
SpineGraph permute_nodes(const SpineGraph& graph, std::span<const int> perm);

}  // namespace spinegnn
