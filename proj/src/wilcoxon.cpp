#include "spinegnn/wilcoxon.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "spinegnn/error.hpp"

namespace spinegnn::stats {

namespace {

struct Ranked {
  std::vector<long> doubled_ranks;  // 2 * mid-rank, always an integer
  std::vector<bool> positive;
  std::vector<std::size_t> tie_sizes;
};

Ranked rank_differences(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("wilcoxon: paired samples of different length " + std::to_string(a.size()) +
                     " and " + std::to_string(b.size()));
  }
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double di = a[i] - b[i];
    if (di != 0.0) d.push_back(di);
  }
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return std::fabs(d[x]) < std::fabs(d[y]); });
  Ranked r;
  r.doubled_ranks.resize(d.size());
  r.positive.resize(d.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && std::fabs(d[order[j]]) == std::fabs(d[order[i]])) ++j;
    // Ranks i+1 .. j share the mid-rank (i + 1 + j) / 2.
    const long doubled = static_cast<long>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) r.doubled_ranks[k] = doubled;
    r.tie_sizes.push_back(j - i);
    i = j;
  }
  for (std::size_t k = 0; k < order.size(); ++k) r.positive[k] = d[order[k]] > 0.0;
  return r;
}

long doubled_w_plus(const Ranked& r) {
  long w = 0;
  for (std::size_t k = 0; k < r.doubled_ranks.size(); ++k) {
    if (r.positive[k]) w += r.doubled_ranks[k];
  }
  return w;
}

}  // namespace

WilcoxonResult wilcoxon_exact(std::span<const double> a, std::span<const double> b) {
  const Ranked r = rank_differences(a, b);
  WilcoxonResult res;
  res.n = r.doubled_ranks.size();
  res.exact = true;
  const long w = doubled_w_plus(r);
  res.w_plus = static_cast<double>(w) / 2.0;
  if (res.n == 0) return res;

  // Distribution of the doubled positive-rank sum over all 2^n equally likely sign patterns.
  const long max_sum = std::accumulate(r.doubled_ranks.begin(), r.doubled_ranks.end(), 0L);
  std::vector<double> count(static_cast<std::size_t>(max_sum) + 1, 0.0);
  count[0] = 1.0;
  long reach = 0;
  for (long rank : r.doubled_ranks) {
    for (long s = reach; s >= 0; --s) count[static_cast<std::size_t>(s + rank)] += count[static_cast<std::size_t>(s)];
    reach += rank;
  }
  const double total = std::ldexp(1.0, static_cast<int>(res.n));
  double lower = 0.0, upper = 0.0;
  for (long s = 0; s <= max_sum; ++s) {
    if (s <= w) lower += count[static_cast<std::size_t>(s)];
    if (s >= w) upper += count[static_cast<std::size_t>(s)];
  }
  res.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / total);
  return res;
}

WilcoxonResult wilcoxon_normal(std::span<const double> a, std::span<const double> b) {
  const Ranked r = rank_differences(a, b);
  WilcoxonResult res;
  res.n = r.doubled_ranks.size();
  res.w_plus = static_cast<double>(doubled_w_plus(r)) / 2.0;
  if (res.n == 0) return res;
  const double n = static_cast<double>(res.n);
  const double mean = n * (n + 1.0) / 4.0;
  double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
  for (std::size_t t : r.tie_sizes) {
    const double tt = static_cast<double>(t);
    var -= (tt * tt * tt - tt) / 48.0;
  }
  if (var <= 0.0) return res;
  const double z = std::max(0.0, std::fabs(res.w_plus - mean) - 0.5) / std::sqrt(var);
  res.p_value = std::clamp(std::erfc(z / std::sqrt(2.0)), std::numeric_limits<double>::min(), 1.0);
  return res;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    std::size_t exact_max_n) {
  WilcoxonResult approx = wilcoxon_normal(a, b);
  if (approx.n <= exact_max_n) return wilcoxon_exact(a, b);
  return approx;
}

}  // namespace spinegnn::stats
