#pragma once

// Brute-force reference implementations used as test oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "spinegnn/hmm.hpp"
#include "spinegnn/matrix.hpp"
#include "spinegnn/rng.hpp"

namespace oracles {

/// Minimum total cost over all permutations of a square matrix.
inline double brute_force_assignment(const spinegnn::Matrix& c) {
  std::vector<std::size_t> perm(c.rows);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < c.rows; ++i) s += c(i, perm[i]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Calls f(states) for every state sequence of length t over n states.
template <class F>
void for_each_path(std::size_t n, std::size_t t, F&& f) {
  std::vector<int> s(t, 0);
  for (;;) {
    f(std::span<const int>(s));
    std::size_t i = 0;
    while (i < t && ++s[i] == static_cast<int>(n)) s[i++] = 0;
    if (i == t) return;
  }
}

/// P(obs) as the sum over all state paths of the joint probability.
inline double enumerate_likelihood(const spinegnn::baselines::Hmm& m, std::span<const int> obs) {
  double total = 0.0;
  for_each_path(m.num_states(), obs.size(), [&](std::span<const int> s) {
    double p = m.pi[static_cast<std::size_t>(s[0])] * m.b(static_cast<std::size_t>(s[0]), static_cast<std::size_t>(obs[0]));
    for (std::size_t i = 1; i < obs.size(); ++i) {
      p *= m.a(static_cast<std::size_t>(s[i - 1]), static_cast<std::size_t>(s[i])) *
           m.b(static_cast<std::size_t>(s[i]), static_cast<std::size_t>(obs[i]));
    }
    total += p;
  });
  return total;
}

/// Highest joint log-probability over all state paths (first path found wins ties).
inline double brute_force_best_path_log_prob(const spinegnn::baselines::Hmm& m, std::span<const int> obs) {
  double best = -std::numeric_limits<double>::infinity();
  for_each_path(m.num_states(), obs.size(), [&](std::span<const int> s) {
    best = std::max(best, spinegnn::baselines::path_log_prob(m, s, obs));
  });
  return best;
}

inline std::vector<double> random_distribution(spinegnn::Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  double s = 0.0;
  for (double& x : v) s += x = spinegnn::uniform(rng, 0.05, 1.0);
  for (double& x : v) x /= s;
  return v;
}

inline spinegnn::baselines::Hmm random_hmm(spinegnn::Rng& rng, std::size_t states, std::size_t symbols) {
  spinegnn::baselines::Hmm m;
  m.pi = random_distribution(rng, states);
  m.a = spinegnn::Matrix(states, states);
  m.b = spinegnn::Matrix(states, symbols);
  for (std::size_t i = 0; i < states; ++i) {
    const auto ra = random_distribution(rng, states);
    const auto rb = random_distribution(rng, symbols);
    std::copy(ra.begin(), ra.end(), m.a.row(i).begin());
    std::copy(rb.begin(), rb.end(), m.b.row(i).begin());
  }
  return m;
}

inline std::vector<int> random_sequence(spinegnn::Rng& rng, std::size_t len, std::size_t symbols) {
  std::vector<int> s(len);
  for (int& x : s) x = static_cast<int>(spinegnn::uniform_index(rng, symbols));
  return s;
}

/// Two-sided exact signed-rank p-value by listing all 2^n sign patterns of the non-zero
/// differences, with mid-ranks computed by direct counting.
inline double enumerate_wilcoxon_p(std::span<const double> a, std::span<const double> b) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  const std::size_t n = d.size();
  if (n == 0) return 1.0;
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double below = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(d[j]) < std::abs(d[i])) ++below;
      if (std::abs(d[j]) == std::abs(d[i])) ++equal;
    }
    rank[i] = below + (equal + 1.0) / 2.0;
  }
  double w = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0) w += rank[i];
  double lower = 0, upper = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) s += rank[i];
    if (s <= w + 1e-9) ++lower;
    if (s >= w - 1e-9) ++upper;
  }
  const double total = std::ldexp(1.0, static_cast<int>(n));
  return std::min(1.0, 2.0 * std::min(lower, upper) / total);
}

}  // namespace oracles
