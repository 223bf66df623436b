#include "spinegnn/metrics.hpp"

#include <limits>

#include "spinegnn/error.hpp"

namespace spinegnn::metrics {

double f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  if (tp + fp + fn == 0) return 1.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

std::optional<double> Identification::d_mean() const {
  if (identified == 0) return std::nullopt;
  return distance_sum_mm / static_cast<double>(identified);
}

Identification identify(const std::vector<LabeledPoint>& ground_truth,
                        const std::vector<LabeledPoint>& predictions) {
  Identification id;
  id.total = ground_truth.size();
  id.flags.assign(ground_truth.size(), 0);
  id.nearest_mm.assign(ground_truth.size(), std::numeric_limits<double>::infinity());
  for (std::size_t g = 0; g < ground_truth.size(); ++g) {
    std::size_t best = predictions.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < predictions.size(); ++p) {
      const double d = distance(ground_truth[g].position, predictions[p].position);
      if (d < best_d) {
        best_d = d;
        best = p;
      }
    }
    if (best == predictions.size()) continue;
    id.nearest_mm[g] = best_d;
    if (best_d <= kIdentificationRadiusMm && predictions[best].level == ground_truth[g].level) {
      id.flags[g] = 1;
      ++id.identified;
      id.distance_sum_mm += best_d;
    }
  }
  return id;
}

double identification_rate(const std::vector<LabeledPoint>& ground_truth,
                           const std::vector<LabeledPoint>& predictions) {
  return identify(ground_truth, predictions).rate();
}

std::optional<double> d_mean(const std::vector<LabeledPoint>& ground_truth,
                             const std::vector<LabeledPoint>& predictions) {
  return identify(ground_truth, predictions).d_mean();
}

EdgeSet make_edge_set(const std::vector<std::pair<int, int>>& edges) {
  EdgeSet s;
  for (const auto& [a, b] : edges) s.emplace(std::min(a, b), std::max(a, b));
  return s;
}

Counts edge_counts(const EdgeSet& predicted, const EdgeSet& target) {
  Counts c;
  for (const auto& e : predicted) {
    if (target.contains(e)) {
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  for (const auto& e : target) {
    if (!predicted.contains(e)) ++c.fn;
  }
  return c;
}

double edge_f1(const EdgeSet& predicted, const EdgeSet& target) {
  return edge_counts(predicted, target).f1();
}

Counts illegitimacy_counts(const std::vector<std::uint8_t>& predicted_illegitimate,
                           const std::vector<std::uint8_t>& target_illegitimate) {
  if (predicted_illegitimate.size() != target_illegitimate.size()) {
    throw ShapeError("illegitimacy flags: " + std::to_string(predicted_illegitimate.size()) +
                     " predictions for " + std::to_string(target_illegitimate.size()) + " targets");
  }
  Counts c;
  for (std::size_t i = 0; i < target_illegitimate.size(); ++i) {
    c.add(predicted_illegitimate[i] != 0, target_illegitimate[i] != 0);
  }
  return c;
}

double illegitimacy_f1(const std::vector<std::uint8_t>& predicted_illegitimate,
                       const std::vector<std::uint8_t>& target_illegitimate) {
  return illegitimacy_counts(predicted_illegitimate, target_illegitimate).f1();
}

std::optional<double> ScanReport::id_rate() const {
  if (!id_total) return std::nullopt;
  if (*id_total == 0) return 1.0;
  return static_cast<double>(id_correct.value_or(0)) / static_cast<double>(*id_total);
}

bool ScanReport::has_error() const {
  if (id_total && id_correct.value_or(0) != *id_total) return true;
  if (edges && (edges->fp != 0 || edges->fn != 0)) return true;
  return false;
}

Aggregate EvalReport::aggregate(const std::set<std::string>* subset) const {
  Aggregate a;
  std::size_t correct = 0, total = 0;
  double dsum = 0.0;
  bool any_id = false;
  Counts edges, illegit;
  bool any_edges = false, any_illegit = false;
  for (const ScanReport& s : scans) {
    if (subset && !subset->contains(s.scan_id)) continue;
    ++a.scans;
    if (s.id_total) {
      any_id = true;
      correct += s.id_correct.value_or(0);
      total += *s.id_total;
      dsum += s.d_sum_mm;
    }
    if (s.edges) {
      any_edges = true;
      edges += *s.edges;
    }
    if (s.illegitimacy) {
      any_illegit = true;
      illegit += *s.illegitimacy;
    }
  }
  if (any_id) {
    a.identification_rate = total == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(total);
    if (correct > 0) a.d_mean_mm = dsum / static_cast<double>(correct);
  }
  if (any_edges) a.edge_f1 = edges.f1();
  if (any_illegit) a.illegitimacy_f1 = illegit.f1();
  return a;
}

std::set<std::string> hard_subset(const std::vector<const EvalReport*>& reports) {
  std::set<std::string> out;
  if (reports.empty()) return out;
  const auto& first = reports.front()->scans;
  for (const EvalReport* r : reports) {
    if (r->scans.size() != first.size()) {
      throw ConfigError("hard_subset: report '" + r->method + "' covers " +
                        std::to_string(r->scans.size()) + " scans, expected " +
                        std::to_string(first.size()));
    }
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (r->scans[i].scan_id != first[i].scan_id) {
        throw ConfigError("hard_subset: misaligned scan ids '" + r->scans[i].scan_id + "' vs '" +
                          first[i].scan_id + "'");
      }
    }
  }
  for (const EvalReport* r : reports) {
    for (const ScanReport& s : r->scans) {
      if (s.has_error()) out.insert(s.scan_id);
    }
  }
  return out;
}

}  // namespace spinegnn::metrics
