#include "spinegnn/graph.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "spinegnn/error.hpp"

namespace spinegnn {

std::array<double, 4> compute_edge_feature(const Vec3& from, const Vec3& to) {
  const Vec3 d = to - from;
  const double len = d.norm();
  if (len == 0.0) return {0.0, 0.0, 0.0, 0.0};
  return {d.x / len, d.y / len, d.z / len, len / kEdgeDistanceUnitMm};
}

std::array<double, kNodeFeatureDim> compute_node_feature(const Keypoint& kp) {
  std::array<double, kNodeFeatureDim> f{};
  f[static_cast<std::size_t>(kp.kind)] = 1.0;
  for (std::size_t s = 0; s < kNumSegments; ++s) f[kNumKeypointTypes + s] = kp.segment_probs[s];
  return f;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent[static_cast<std::size_t>(b)] = a;
    return true;
  }
};

double sq_dist(const Vec3& a, const Vec3& b) {
  const Vec3 d = a - b;
  return d.dot(d);
}

// Other nodes sorted by (distance, index), optionally restricted by a predicate.
template <typename Keep>
std::vector<int> neighbours_by_distance(std::span<const Vec3> pts, int u, Keep keep) {
  std::vector<std::pair<double, int>> order;
  order.reserve(pts.size());
  for (std::size_t v = 0; v < pts.size(); ++v) {
    if (static_cast<int>(v) == u || !keep(static_cast<int>(v))) continue;
    order.emplace_back(sq_dist(pts[static_cast<std::size_t>(u)], pts[v]), static_cast<int>(v));
  }
  std::sort(order.begin(), order.end());
  std::vector<int> out;
  out.reserve(order.size());
  for (const auto& [d, v] : order) out.push_back(v);
  return out;
}

std::pair<int, int> ordered(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

}  // namespace

std::vector<std::pair<int, int>> knn_edges(std::span<const Vec3> points, int k) {
  if (k < 1) throw ConfigError("k must be at least 1");
  std::set<std::pair<int, int>> edges;
  for (std::size_t u = 0; u < points.size(); ++u) {
    const auto nb = neighbours_by_distance(points, static_cast<int>(u), [](int) { return true; });
    const std::size_t take = std::min(nb.size(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < take; ++i) edges.insert(ordered(static_cast<int>(u), nb[i]));
  }
  return {edges.begin(), edges.end()};
}

std::size_t count_components(std::size_t num_nodes, std::span<const std::pair<int, int>> edges) {
  UnionFind uf(num_nodes);
  std::size_t components = num_nodes;
  for (const auto& [a, b] : edges) {
    if (uf.unite(a, b)) --components;
  }
  return components;
}

SpineGraph build_knn_graph(const std::vector<Keypoint>& keypoints, int k) {
  if (keypoints.size() < 2) throw ConfigError("graph underflow: need at least 2 keypoints");
  if (k < 1) throw ConfigError("k must be at least 1");
  std::vector<Vec3> pts;
  pts.reserve(keypoints.size());
  for (const Keypoint& kp : keypoints) pts.push_back(kp.position);

  const auto base = knn_edges(pts, k);
  std::set<std::pair<int, int>> edges(base.begin(), base.end());
  UnionFind uf(pts.size());
  for (const auto& [a, b] : edges) uf.unite(a, b);

  const std::size_t fan_out = static_cast<std::size_t>((k + 2) / 3);
  for (;;) {
    // Closest pair of nodes in different components; lexicographic (a, b) breaks ties.
    double best = -1.0;
    int ba = -1;
    for (std::size_t a = 0; a < pts.size(); ++a) {
      for (std::size_t b = a + 1; b < pts.size(); ++b) {
        if (uf.find(static_cast<int>(a)) == uf.find(static_cast<int>(b))) continue;
        const double d = sq_dist(pts[a], pts[b]);
        if (ba < 0 || d < best) {
          best = d;
          ba = static_cast<int>(a);
        }
      }
    }
    if (ba < 0) break;
    const int root = uf.find(ba);
    const auto outside = neighbours_by_distance(pts, ba, [&](int v) { return uf.find(v) != root; });
    const std::size_t take = std::min(outside.size(), fan_out);
    for (std::size_t i = 0; i < take; ++i) edges.insert(ordered(ba, outside[i]));
    for (std::size_t i = 0; i < take; ++i) uf.unite(ba, outside[i]);
  }

  SpineGraph g;
  g.nodes = keypoints;
  g.undirected.assign(edges.begin(), edges.end());
  const std::size_t n = keypoints.size();
  const std::size_t u = g.undirected.size();

  g.node_features = Matrix(n, kNodeFeatureDim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = compute_node_feature(keypoints[i]);
    std::copy(f.begin(), f.end(), g.node_features.row(i).begin());
  }

  g.directed.reserve(2 * u);
  g.edge_features = Matrix(2 * u, kEdgeFeatureDim);
  g.edge_is_predictable.resize(u);
  for (std::size_t e = 0; e < u; ++e) {
    const auto [a, b] = g.undirected[e];
    g.directed.emplace_back(a, b);
    g.directed.emplace_back(b, a);
    const auto fab = compute_edge_feature(pts[static_cast<std::size_t>(a)], pts[static_cast<std::size_t>(b)]);
    const auto fba = compute_edge_feature(pts[static_cast<std::size_t>(b)], pts[static_cast<std::size_t>(a)]);
    std::copy(fab.begin(), fab.end(), g.edge_features.row(2 * e).begin());
    std::copy(fba.begin(), fba.end(), g.edge_features.row(2 * e + 1).begin());
    const bool a_body = keypoints[static_cast<std::size_t>(a)].kind == KeypointType::body;
    const bool b_body = keypoints[static_cast<std::size_t>(b)].kind == KeypointType::body;
    g.edge_is_predictable[e] = a_body != b_body ? 1 : 0;
  }
  return g;
}

void assign_targets(SpineGraph& graph, const std::vector<Keypoint>& ground_truth) {
  const std::size_t n = graph.nodes.size();
  std::vector<std::optional<SpineLevel>> level(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Keypoint& kp = graph.nodes[i];
    level[i] = kp.level;
    if (kp.source_id && *kp.source_id >= 0 &&
        static_cast<std::size_t>(*kp.source_id) < ground_truth.size()) {
      level[i] = ground_truth[static_cast<std::size_t>(*kp.source_id)].level;
    }
  }
  graph.level_target.assign(n, -1);
  graph.legit_target.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Keypoint& kp = graph.nodes[i];
    graph.legit_target[i] = kp.legitimate ? 1 : 0;
    if (kp.legitimate && kp.kind == KeypointType::body && level[i]) {
      graph.level_target[i] = level[i]->index();
    }
  }
  graph.edge_target.assign(graph.undirected.size(), 0);
  for (std::size_t e = 0; e < graph.undirected.size(); ++e) {
    if (!graph.edge_is_predictable[e]) continue;
    const auto a = static_cast<std::size_t>(graph.undirected[e].first);
    const auto b = static_cast<std::size_t>(graph.undirected[e].second);
    const bool ok = graph.nodes[a].legitimate && graph.nodes[b].legitimate && level[a] && level[b] &&
                    *level[a] == *level[b];
    graph.edge_target[e] = ok ? 1 : 0;
  }
}

SpineGraph make_graph(const std::vector<Keypoint>& keypoints,
                      const std::vector<Keypoint>& ground_truth, int k) {
  SpineGraph g = build_knn_graph(keypoints, k);
  assign_targets(g, ground_truth);
  return g;
}

SpineGraph disjoint_union(std::span<const SpineGraph* const> graphs) {
  SpineGraph out;
  std::size_t total_nodes = 0;
  std::size_t total_directed = 0;
  for (const SpineGraph* g : graphs) {
    total_nodes += g->num_nodes();
    total_directed += g->num_directed();
  }
  out.node_features = Matrix(total_nodes, kNodeFeatureDim);
  out.edge_features = Matrix(total_directed, kEdgeFeatureDim);
  std::size_t node_off = 0;
  std::size_t edge_off = 0;
  for (const SpineGraph* g : graphs) {
    const int off = static_cast<int>(node_off);
    out.nodes.insert(out.nodes.end(), g->nodes.begin(), g->nodes.end());
    for (const auto& [a, b] : g->undirected) out.undirected.emplace_back(a + off, b + off);
    for (const auto& [a, b] : g->directed) out.directed.emplace_back(a + off, b + off);
    std::copy(g->node_features.data.begin(), g->node_features.data.end(),
              out.node_features.data.begin() + static_cast<std::ptrdiff_t>(node_off * kNodeFeatureDim));
    std::copy(g->edge_features.data.begin(), g->edge_features.data.end(),
              out.edge_features.data.begin() + static_cast<std::ptrdiff_t>(edge_off * kEdgeFeatureDim));
    out.edge_is_predictable.insert(out.edge_is_predictable.end(), g->edge_is_predictable.begin(),
                                   g->edge_is_predictable.end());
    out.level_target.insert(out.level_target.end(), g->level_target.begin(), g->level_target.end());
    out.legit_target.insert(out.legit_target.end(), g->legit_target.begin(), g->legit_target.end());
    out.edge_target.insert(out.edge_target.end(), g->edge_target.begin(), g->edge_target.end());
    node_off += g->num_nodes();
    edge_off += g->num_directed();
  }
  return out;
}

SpineGraph permute_nodes(const SpineGraph& graph, std::span<const int> perm) {
  const std::size_t n = graph.num_nodes();
  if (perm.size() != n) throw ShapeError("permute_nodes: permutation size mismatch");
  SpineGraph out = graph;
  const bool has_targets = graph.level_target.size() == n;
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(perm[i]);
    out.nodes[j] = graph.nodes[i];
    std::copy(graph.node_features.row(i).begin(), graph.node_features.row(i).end(),
              out.node_features.row(j).begin());
    if (has_targets) {
      out.level_target[j] = graph.level_target[i];
      out.legit_target[j] = graph.legit_target[i];
    }
  }
  for (auto& [a, b] : out.undirected) {
    a = perm[static_cast<std::size_t>(a)];
    b = perm[static_cast<std::size_t>(b)];
  }
  for (auto& [a, b] : out.directed) {
    a = perm[static_cast<std::size_t>(a)];
    b = perm[static_cast<std::size_t>(b)];
  }
  return out;
}

}  // namespace spinegnn
