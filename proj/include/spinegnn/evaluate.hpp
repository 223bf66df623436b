#pragma once

// Per-scan evaluation of the GNN and the two baselines, report files, and method comparison.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spinegnn/dataset.hpp"
#include "spinegnn/gnn.hpp"
#include "spinegnn/hmm.hpp"
#include "spinegnn/hungarian.hpp"
#include "spinegnn/metrics.hpp"
#include "spinegnn/wilcoxon.hpp"

namespace spinegnn::eval {

using dataset::ScanRecord;
using metrics::EvalReport;
using metrics::ScanReport;

/// Legitimate ground-truth bodies with a level.
std::vector<metrics::LabeledPoint> truth_bodies(const ScanRecord& record);
/// Every (legitimate body, legitimate pedicle) pair of the same level among the detections.
metrics::EdgeSet true_edges(const std::vector<Keypoint>& keypoints);

struct GnnEvalOptions {
  int k = 14;
  bool legitimacy = false;
  double edge_threshold = 0.5;
};

/// Builds the scan's graph, predicts, and scores identification, edges and (with legitimacy)
/// illegitimacy.
ScanReport gnn_scan_report(gnn::GnnModel& model, const ScanRecord& record, const GnnEvalOptions& options);
EvalReport evaluate_gnn(gnn::GnnModel& model, const std::vector<const ScanRecord*>& records,
                        const GnnEvalOptions& options, const std::string& method = "gnn");

/// Observed segment sequences of the legitimate bodies, head to tail, one per record.
std::vector<std::vector<int>> hmm_sequences(const std::vector<const ScanRecord*>& records);
/// Baum-Welch from the default level model on the records' sequences.
baselines::BaumWelchResult fit_level_hmm(const std::vector<const ScanRecord*>& records,
                                         const baselines::BaumWelchOptions& options = {});
/// Identification only; illegitimate detections are removed before decoding.
ScanReport hmm_scan_report(const baselines::Hmm& model, const ScanRecord& record);
EvalReport evaluate_hmm(const baselines::Hmm& model, const std::vector<const ScanRecord*>& records);

/// Edge association only, on all detections.
ScanReport hungarian_scan_report(const ScanRecord& record,
                                 double max_distance_mm = baselines::kDefaultMatchingDistanceMm);
EvalReport evaluate_hungarian(const std::vector<const ScanRecord*>& records,
                              double max_distance_mm = baselines::kDefaultMatchingDistanceMm);

std::vector<const ScanRecord*> all_records(const dataset::Corpus& corpus);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
/// One row per scan plus a final "ALL" row with the aggregates.
std::string report_to_csv(const EvalReport& report);
/// Writes JSON, or CSV when the path ends in ".csv".
void save_report(const EvalReport& report, const std::string& path);
EvalReport load_report(const std::string& path);

struct MetricComparison {
  std::string metric;  // "identification_rate" or "edge_f1"
  std::optional<double> a_full, b_full, a_hard, b_hard;
  /// Paired over per-scan scores, full set.
  stats::WilcoxonResult wilcoxon;
};

struct Comparison {
  std::string method_a, method_b;
  std::size_t scans = 0;
  std::set<std::string> hard_subset;
  metrics::Aggregate a_full, b_full, a_hard, b_hard;
  /// Only metrics both reports provide.
  std::vector<MetricComparison> metrics;
};

/// Throws ConfigError when the reports do not cover the same scans in the same order.
Comparison compare(const EvalReport& a, const EvalReport& b);
std::string comparison_to_json(const Comparison& c);
std::string comparison_table(const Comparison& c);

}  // namespace spinegnn::eval
