#pragma once

// Evaluation metrics: identification rate and d_mean on body keypoints, F1 scores for edge
// association and illegitimacy, per-scan reports and the hard subset.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "spinegnn/spine.hpp"

namespace spinegnn::metrics {

/// Maximum distance for a ground-truth body to count as identified.
inline constexpr double kIdentificationRadiusMm = 20.0;

/// F1 = 2 tp / (2 tp + fp + fn); 1.0 when there is nothing to find and nothing was found.
double f1(std::size_t tp, std::size_t fp, std::size_t fn);

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  void add(bool predicted, bool actual) {
    if (predicted && actual) ++tp;
    if (predicted && !actual) ++fp;
    if (!predicted && actual) ++fn;
  }
  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  double f1() const { return metrics::f1(tp, fp, fn); }
  bool operator==(const Counts&) const = default;
};

struct LabeledPoint {
  Vec3 position;
  int level = -1;
};

struct Identification {
  std::size_t identified = 0;
  std::size_t total = 0;
  std::vector<std::uint8_t> flags;  // per ground-truth body
  std::vector<double> nearest_mm;   // distance to the nearest prediction, per ground-truth body
  double distance_sum_mm = 0.0;     // over identified bodies

  double rate() const { return total == 0 ? 1.0 : static_cast<double>(identified) / static_cast<double>(total); }
  /// Mean distance over identified bodies; empty when none is identified.
  std::optional<double> d_mean() const;
};

/// Each ground-truth body is identified iff its nearest prediction (independently chosen, not a
/// one-to-one assignment) lies within 20 mm and carries the same level. No predictions -> rate 0.
Identification identify(const std::vector<LabeledPoint>& ground_truth,
                        const std::vector<LabeledPoint>& predictions);
double identification_rate(const std::vector<LabeledPoint>& ground_truth,
                           const std::vector<LabeledPoint>& predictions);
std::optional<double> d_mean(const std::vector<LabeledPoint>& ground_truth,
                             const std::vector<LabeledPoint>& predictions);

using EdgeSet = std::set<std::pair<int, int>>;
/// Normalises every pair to (min, max).
EdgeSet make_edge_set(const std::vector<std::pair<int, int>>& edges);
Counts edge_counts(const EdgeSet& predicted, const EdgeSet& target);
double edge_f1(const EdgeSet& predicted, const EdgeSet& target);
/// Positive class is "illegitimate".
Counts illegitimacy_counts(const std::vector<std::uint8_t>& predicted_illegitimate,
                           const std::vector<std::uint8_t>& target_illegitimate);
double illegitimacy_f1(const std::vector<std::uint8_t>& predicted_illegitimate,
                       const std::vector<std::uint8_t>& target_illegitimate);

/// Metrics of one method on one scan. Fields a method does not produce stay absent.
struct ScanReport {
  std::string scan_id;
  std::optional<std::size_t> id_correct;
  std::optional<std::size_t> id_total;
  double d_sum_mm = 0.0;
  std::optional<Counts> edges;
  std::optional<Counts> illegitimacy;

  bool has_identification() const { return id_total.has_value(); }
  std::optional<double> id_rate() const;
  /// True when the scan has an identification or edge error.
  bool has_error() const;
};

struct Aggregate {
  std::optional<double> identification_rate;
  std::optional<double> d_mean_mm;
  std::optional<double> edge_f1;
  std::optional<double> illegitimacy_f1;
  std::size_t scans = 0;
};

struct EvalReport {
  std::string method;
  std::vector<ScanReport> scans;

  /// Aggregates over all scans, or only those whose id is in `subset` when given.
  Aggregate aggregate(const std::set<std::string>* subset = nullptr) const;
};

/// Scans on which any of the reports has an identification or edge error. Throws ConfigError
/// when the reports do not cover the same scan ids in the same order.
std::set<std::string> hard_subset(const std::vector<const EvalReport*>& reports);

}  // namespace spinegnn::metrics
