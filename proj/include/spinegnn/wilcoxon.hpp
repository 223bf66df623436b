#pragma once

#include <cstddef>
#include <span>

namespace spinegnn::stats {

struct WilcoxonResult {
  double p_value = 1.0;   // two-sided, in (0, 1]
  double w_plus = 0.0;    // sum of ranks of positive differences (mid-ranks on ties)
  std::size_t n = 0;      // non-zero differences
  bool exact = false;
};

inline constexpr std::size_t kWilcoxonExactMaxN = 12;

/// Wilcoxon signed-rank test on the paired differences a[i] - b[i]. Zero differences are dropped.
/// Exact null distribution (all 2^n sign patterns) for n <= exact_max_n, otherwise the normal
/// approximation with tie and continuity corrections. No non-zero differences -> p = 1.
/// Throws ShapeError for samples of unequal length.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    std::size_t exact_max_n = kWilcoxonExactMaxN);

/// Both branches on the same data, for cross-checking.
WilcoxonResult wilcoxon_exact(std::span<const double> a, std::span<const double> b);
WilcoxonResult wilcoxon_normal(std::span<const double> a, std::span<const double> b);

}  // namespace spinegnn::stats
