#pragma once

#include <vector>

#include "spinegnn/graph.hpp"
#include "spinegnn/rng.hpp"
#include "spinegnn/spine.hpp"

namespace fixtures {

/// n keypoints scattered in a 300 mm box with random kinds, levels, legitimacy and segment scores.
inline std::vector<spinegnn::Keypoint> random_keypoints(spinegnn::Rng& rng, std::size_t n) {
  using namespace spinegnn;
  std::vector<Keypoint> kps(n);
  for (std::size_t i = 0; i < n; ++i) {
    Keypoint& k = kps[i];
    k.position = {uniform(rng, -150, 150), uniform(rng, -150, 150), uniform(rng, -150, 150)};
    k.kind = static_cast<KeypointType>(uniform_index(rng, 3));
    k.level = SpineLevel(static_cast<int>(uniform_index(rng, kNumLevels)));
    k.legitimate = uniform(rng, 0, 1) < 0.8;
    for (double& p : k.segment_probs) p = uniform(rng, 0, 1);
    k.source_id = static_cast<int>(i);
  }
  return kps;
}

inline spinegnn::SpineGraph random_graph(spinegnn::Rng& rng, std::size_t n, int k) {
  const auto kps = random_keypoints(rng, n);
  return spinegnn::make_graph(kps, kps, k);
}

/// Random permutation of 0..n-1.
inline std::vector<int> random_permutation(spinegnn::Rng& rng, std::size_t n) {
  std::vector<int> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<int>(i);
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[spinegnn::uniform_index(rng, i)]);
  return p;
}

}  // namespace fixtures
