#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <set>

#include "spinegnn/augment.hpp"
#include "spinegnn/error.hpp"
#include "spinegnn/graph.hpp"

using namespace spinegnn;

namespace {

Keypoint body_at(double x, double y, double z) {
  Keypoint k;
  k.position = {x, y, z};
  return k;
}

struct UnionFind {
  std::vector<int> p;
  explicit UnionFind(std::size_t n) : p(n) { std::iota(p.begin(), p.end(), 0); }
  int find(int x) { return p[static_cast<std::size_t>(x)] == x ? x : p[static_cast<std::size_t>(x)] = find(p[static_cast<std::size_t>(x)]); }
  void unite(int a, int b) { p[static_cast<std::size_t>(find(a))] = find(b); }
};

bool connected(std::size_t n, const std::vector<std::pair<int, int>>& edges) {
  UnionFind uf(n);
  for (auto [a, b] : edges) uf.unite(a, b);
  for (std::size_t i = 1; i < n; ++i)
    if (uf.find(static_cast<int>(i)) != uf.find(0)) return false;
  return true;
}

}  // namespace

TEST_CASE("edge features") {
  auto f = compute_edge_feature({0, 0, 0}, {0, 0, 30});
  CHECK(f == std::array<double, 4>{0, 0, 1, 0.3});
  CHECK(compute_edge_feature({0, 0, 0}, {0, 0, 0}) == std::array<double, 4>{0, 0, 0, 0});
  f = compute_edge_feature({10, 0, 0}, {0, 0, 0});
  CHECK(f[0] == -1.0);
  CHECK(f[1] == 0.0);
  CHECK(f[2] == 0.0);
  CHECK(f[3] == doctest::Approx(0.1));
}

TEST_CASE("node features: one-hot kind then segment probabilities") {
  Keypoint k;
  k.kind = KeypointType::right_pedicle;
  k.segment_probs = {0.1, 0.2, 0.3, 0.4};
  CHECK(compute_node_feature(k) == std::array<double, 7>{0, 0, 1, 0.1, 0.2, 0.3, 0.4});
}

TEST_CASE("three collinear points with k=1") {
  const std::vector<Keypoint> kps = {body_at(0, 0, 0), body_at(0, 0, 30), body_at(0, 0, 60)};
  const auto g = build_knn_graph(kps, 1);
  CHECK(g.undirected == std::vector<std::pair<int, int>>{{0, 1}, {1, 2}});
  CHECK(count_components(3, g.undirected) == 1);
  REQUIRE(g.directed.size() == 4);
  CHECK(g.directed[0] == std::pair{0, 1});
  CHECK(g.directed[1] == std::pair{1, 0});
  CHECK(g.edge_features.rows == 4);
}

TEST_CASE("two far clusters are joined by the fallback") {
  std::vector<Keypoint> kps;
  for (int i = 0; i < 4; ++i) kps.push_back(body_at(i * 10.0, 0, 0));
  for (int i = 0; i < 4; ++i) kps.push_back(body_at(1000.0 + i * 10.0, 0, 0));
  CHECK(count_components(8, knn_edges([&] {
                           std::vector<Vec3> p;
                           for (auto& k : kps) p.push_back(k.position);
                           return p;
                         }(), 2)) == 2);
  const auto g = build_knn_graph(kps, 2);
  CHECK(connected(8, g.undirected));
}

TEST_CASE("84-keypoint spine with k=14: k-NN oracle and connectivity") {
  const auto kps = generate_synthetic_spine({});
  const auto g = build_knn_graph(kps, 14);
  std::set<std::pair<int, int>> edges(g.undirected.begin(), g.undirected.end());
  const int n = static_cast<int>(kps.size());
  for (int u = 0; u < n; ++u) {
    std::vector<int> others;
    for (int v = 0; v < n; ++v)
      if (v != u) others.push_back(v);
    std::stable_sort(others.begin(), others.end(), [&](int a, int b) {
      return distance(kps[static_cast<std::size_t>(u)].position, kps[static_cast<std::size_t>(a)].position) <
             distance(kps[static_cast<std::size_t>(u)].position, kps[static_cast<std::size_t>(b)].position);
    });
    for (int i = 0; i < 14; ++i) {
      const int v = others[static_cast<std::size_t>(i)];
      CHECK(edges.count({std::min(u, v), std::max(u, v)}) == 1);
    }
  }
  std::vector<int> degree(kps.size(), 0);
  for (auto [a, b] : g.undirected) {
    CHECK(a < b);
    ++degree[static_cast<std::size_t>(a)];
    ++degree[static_cast<std::size_t>(b)];
  }
  for (int d : degree) CHECK(d >= 14);
  CHECK(connected(kps.size(), g.undirected));
  CHECK(std::is_sorted(g.undirected.begin(), g.undirected.end()));
}

TEST_CASE("graph construction errors") {
  CHECK_THROWS_AS(build_knn_graph({body_at(0, 0, 0)}, 3), ConfigError);
  CHECK_THROWS_AS(build_knn_graph({body_at(0, 0, 0), body_at(1, 0, 0)}, 0), ConfigError);
}

TEST_CASE("targets on a clean full spine") {
  const auto kps = generate_synthetic_spine({});
  const auto g = make_graph(kps, kps, 14);
  std::size_t positives = 0;
  std::vector<int> per_body(kps.size(), 0);
  for (std::size_t e = 0; e < g.num_undirected(); ++e) {
    if (!g.edge_target[e]) continue;
    CHECK(g.edge_is_predictable[e]);
    ++positives;
    const auto [a, b] = g.undirected[e];
    const int body = kps[static_cast<std::size_t>(a)].kind == KeypointType::body ? a : b;
    ++per_body[static_cast<std::size_t>(body)];
  }
  CHECK(positives == 56);
  for (std::size_t i = 0; i < kps.size(); ++i) {
    if (kps[i].kind == KeypointType::body) {
      CHECK(per_body[i] == 2);
      CHECK(g.level_target[i] == kps[i].level->index());
    } else {
      CHECK(g.level_target[i] == -1);
    }
    CHECK(g.legit_target[i] == 1);
  }
}

TEST_CASE("illegitimate clone gets only negative edge targets") {
  auto kps = generate_synthetic_spine({});
  Keypoint clone = kps[30];
  clone.position += Vec3{3, 2, 1};
  clone.legitimate = false;
  kps.push_back(clone);
  const auto gt = generate_synthetic_spine({});
  const auto g = make_graph(kps, gt, 14);
  const int c = static_cast<int>(kps.size()) - 1;
  bool near_true_pedicle = false;
  for (std::size_t e = 0; e < g.num_undirected(); ++e) {
    const auto [a, b] = g.undirected[e];
    if (a != c && b != c) continue;
    CHECK(g.edge_target[e] == 0);
    const int other = a == c ? b : a;
    if (other == 31 || other == 32) near_true_pedicle = true;
  }
  CHECK(near_true_pedicle);
  CHECK(g.level_target[static_cast<std::size_t>(c)] == -1);
  CHECK(g.legit_target[static_cast<std::size_t>(c)] == 0);
}

TEST_CASE("deleted left pedicle leaves its body one positive edge") {
  auto kps = generate_synthetic_spine({});
  const auto gt = kps;
  kps.erase(kps.begin() + 31);  // left pedicle of body 30
  const auto g = make_graph(kps, gt, 14);
  int count = 0;
  for (std::size_t e = 0; e < g.num_undirected(); ++e) {
    const auto [a, b] = g.undirected[e];
    if ((a == 30 || b == 30) && g.edge_target[e]) ++count;
  }
  CHECK(count == 1);
}

TEST_CASE("predictable edges join exactly one body") {
  const auto kps = augment(generate_synthetic_spine({}), AugmentationConfig::preset(AugmentationLevel::heavy), 3);
  const auto g = build_knn_graph(kps, 14);
  for (std::size_t e = 0; e < g.num_undirected(); ++e) {
    const auto [a, b] = g.undirected[e];
    const bool ba = kps[static_cast<std::size_t>(a)].kind == KeypointType::body;
    const bool bb = kps[static_cast<std::size_t>(b)].kind == KeypointType::body;
    CHECK(static_cast<bool>(g.edge_is_predictable[e]) == (ba != bb));
  }
}

TEST_CASE("disjoint union and permutation") {
  const auto a = make_graph(generate_synthetic_spine({}), generate_synthetic_spine({}), 5);
  SyntheticSpineConfig c;
  c.variant = SpineVariant::no_T13_L6_S2;
  const auto kb = generate_synthetic_spine(c);
  const auto b = make_graph(kb, kb, 5);
  const SpineGraph* parts[] = {&a, &b};
  const auto u = disjoint_union(parts);
  CHECK(u.num_nodes() == a.num_nodes() + b.num_nodes());
  CHECK(u.num_undirected() == a.num_undirected() + b.num_undirected());
  CHECK(count_components(u.num_nodes(), u.undirected) == 2);
  const auto [x, y] = u.undirected.back();
  CHECK(x == b.undirected.back().first + static_cast<int>(a.num_nodes()));
  CHECK(y == b.undirected.back().second + static_cast<int>(a.num_nodes()));

  std::vector<int> perm(a.num_nodes());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>((i * 5 + 2) % perm.size());
  const auto p = permute_nodes(a, perm);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    CHECK(p.nodes[static_cast<std::size_t>(perm[i])] == a.nodes[i]);
    CHECK(p.level_target[static_cast<std::size_t>(perm[i])] == a.level_target[i]);
  }
  CHECK(p.edge_target == a.edge_target);
}

TEST_CASE("heavily augmented spines always give connected graphs") {
  const auto base = generate_synthetic_spine({});
  const auto heavy = AugmentationConfig::preset(AugmentationLevel::heavy);
  std::size_t connected_count = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto scan = augment_scan(base, heavy, seed);
    const auto g = make_graph(scan.keypoints, scan.ground_truth, 14);
    connected_count += connected(g.num_nodes(), g.undirected);
  }
  CHECK(connected_count == 1000);
}
