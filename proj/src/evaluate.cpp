#include "spinegnn/evaluate.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "spinegnn/error.hpp"
#include "spinegnn/hungarian.hpp"

namespace spinegnn::eval {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

const std::vector<Keypoint>& target_reference(const ScanRecord& r) {
  return r.ground_truth ? *r.ground_truth : r.keypoints;
}

ordered_json counts_json(const metrics::Counts& c) { return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}}; }

metrics::Counts counts_from(const json& j) {
  return {j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(), j.at("fn").get<std::size_t>()};
}

template <typename T>
ordered_json opt_json(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json aggregate_json(const metrics::Aggregate& a) {
  ordered_json j;
  j["scans"] = a.scans;
  j["identification_rate"] = opt_json(a.identification_rate);
  j["d_mean_mm"] = opt_json(a.d_mean_mm);
  j["edge_f1"] = opt_json(a.edge_f1);
  j["illegitimacy_f1"] = opt_json(a.illegitimacy_f1);
  return j;
}

std::string fmt(const std::optional<double>& v, double scale = 1.0, int prec = 2) {
  if (!v) return "-";
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(prec) << *v * scale;
  return ss.str();
}

std::string csv_num(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream ss;
  ss << std::setprecision(17) << *v;
  return ss.str();
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::vector<metrics::LabeledPoint> truth_bodies(const ScanRecord& record) {
  std::vector<metrics::LabeledPoint> out;
  for (const auto& kp : record.truth()) {
    if (kp.kind == KeypointType::body && kp.legitimate && kp.level) out.push_back({kp.position, kp.level->index()});
  }
  return out;
}

metrics::EdgeSet true_edges(const std::vector<Keypoint>& keypoints) {
  metrics::EdgeSet out;
  for (std::size_t b = 0; b < keypoints.size(); ++b) {
    const auto& body = keypoints[b];
    if (body.kind != KeypointType::body || !body.legitimate || !body.level) continue;
    for (std::size_t p = 0; p < keypoints.size(); ++p) {
      const auto& ped = keypoints[p];
      if (ped.kind == KeypointType::body || !ped.legitimate || ped.level != body.level) continue;
      out.emplace(static_cast<int>(std::min(b, p)), static_cast<int>(std::max(b, p)));
    }
  }
  return out;
}

ScanReport gnn_scan_report(gnn::GnnModel& model, const ScanRecord& record, const GnnEvalOptions& options) {
  const SpineGraph g = make_graph(record.keypoints, target_reference(record), options.k);
  const gnn::PredictionSet pred = gnn::predict(model, g, options.edge_threshold, options.legitimacy);

  ScanReport rep;
  rep.scan_id = record.scan_id;
  std::vector<metrics::LabeledPoint> predicted;
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    if (pred.node_level[i] >= 0) predicted.push_back({g.nodes[i].position, pred.node_level[i]});
  }
  const auto id = metrics::identify(truth_bodies(record), predicted);
  rep.id_correct = id.identified;
  rep.id_total = id.total;
  rep.d_sum_mm = id.distance_sum_mm;
  rep.edges = metrics::edge_counts(metrics::make_edge_set(pred.positive_edges), true_edges(record.keypoints));
  if (options.legitimacy) {
    std::vector<std::uint8_t> predicted_illegit(g.num_nodes()), target_illegit(g.num_nodes());
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
      predicted_illegit[i] = pred.kept[i] ? 0 : 1;
      target_illegit[i] = g.nodes[i].legitimate ? 0 : 1;
    }
    rep.illegitimacy = metrics::illegitimacy_counts(predicted_illegit, target_illegit);
  }
  return rep;
}

EvalReport evaluate_gnn(gnn::GnnModel& model, const std::vector<const ScanRecord*>& records,
                        const GnnEvalOptions& options, const std::string& method) {
  EvalReport rep{method, {}};
  rep.scans.reserve(records.size());
  for (const ScanRecord* r : records) rep.scans.push_back(gnn_scan_report(model, *r, options));
  return rep;
}

std::vector<std::vector<int>> hmm_sequences(const std::vector<const ScanRecord*>& records) {
  std::vector<std::vector<int>> out;
  for (const ScanRecord* r : records) {
    const auto order = baselines::ordered_bodies(r->keypoints, true);
    out.push_back(baselines::segment_sequence(r->keypoints, order));
  }
  return out;
}

baselines::BaumWelchResult fit_level_hmm(const std::vector<const ScanRecord*>& records,
                                         const baselines::BaumWelchOptions& options) {
  return baselines::baum_welch(hmm_sequences(records), baselines::default_level_hmm(), options);
}

ScanReport hmm_scan_report(const baselines::Hmm& model, const ScanRecord& record) {
  ScanReport rep;
  rep.scan_id = record.scan_id;
  std::vector<metrics::LabeledPoint> predicted;
  for (const auto& [idx, level] : baselines::hmm_decode_levels(model, record.keypoints, true)) {
    predicted.push_back({record.keypoints[static_cast<std::size_t>(idx)].position, level.index()});
  }
  const auto id = metrics::identify(truth_bodies(record), predicted);
  rep.id_correct = id.identified;
  rep.id_total = id.total;
  rep.d_sum_mm = id.distance_sum_mm;
  return rep;
}

EvalReport evaluate_hmm(const baselines::Hmm& model, const std::vector<const ScanRecord*>& records) {
  EvalReport rep{"hmm", {}};
  for (const ScanRecord* r : records) rep.scans.push_back(hmm_scan_report(model, *r));
  return rep;
}

ScanReport hungarian_scan_report(const ScanRecord& record, double max_distance_mm) {
  ScanReport rep;
  rep.scan_id = record.scan_id;
  const auto pairs = baselines::associate_by_matching(record.keypoints, max_distance_mm);
  rep.edges = metrics::edge_counts(metrics::make_edge_set(pairs), true_edges(record.keypoints));
  return rep;
}

EvalReport evaluate_hungarian(const std::vector<const ScanRecord*>& records, double max_distance_mm) {
  EvalReport rep{"hungarian", {}};
  for (const ScanRecord* r : records) rep.scans.push_back(hungarian_scan_report(*r, max_distance_mm));
  return rep;
}

std::vector<const ScanRecord*> all_records(const dataset::Corpus& corpus) {
  std::vector<const ScanRecord*> out;
  for (const auto& r : corpus.records) out.push_back(&r);
  return out;
}

std::string report_to_json(const EvalReport& report) {
  ordered_json doc;
  doc["method"] = report.method;
  doc["aggregate"] = aggregate_json(report.aggregate());
  ordered_json scans = ordered_json::array();
  for (const auto& s : report.scans) {
    ordered_json sj;
    sj["id"] = s.scan_id;
    if (s.id_total) {
      sj["id_correct"] = s.id_correct.value_or(0);
      sj["id_total"] = *s.id_total;
      sj["d_sum_mm"] = s.d_sum_mm;
    }
    if (s.edges) sj["edges"] = counts_json(*s.edges);
    if (s.illegitimacy) sj["illegitimacy"] = counts_json(*s.illegitimacy);
    scans.push_back(std::move(sj));
  }
  doc["scans"] = std::move(scans);
  return doc.dump(1) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("report is not valid JSON: ") + e.what());
  }
  EvalReport rep;
  try {
    rep.method = doc.at("method").get<std::string>();
    for (const json& sj : doc.at("scans")) {
      ScanReport s;
      s.scan_id = sj.at("id").get<std::string>();
      if (sj.contains("id_total")) {
        s.id_correct = sj.at("id_correct").get<std::size_t>();
        s.id_total = sj.at("id_total").get<std::size_t>();
        s.d_sum_mm = sj.at("d_sum_mm").get<double>();
      }
      if (sj.contains("edges")) s.edges = counts_from(sj.at("edges"));
      if (sj.contains("illegitimacy")) s.illegitimacy = counts_from(sj.at("illegitimacy"));
      rep.scans.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
  return rep;
}

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "scan_id,id_correct,id_total,id_rate,d_sum_mm,edge_tp,edge_fp,edge_fn,edge_f1,"
         "illegit_tp,illegit_fp,illegit_fn,illegit_f1\n";
  auto counts = [&](const std::optional<metrics::Counts>& c) {
    if (!c) return std::string(",,,");
    return std::to_string(c->tp) + "," + std::to_string(c->fp) + "," + std::to_string(c->fn) + "," + csv_num(c->f1());
  };
  for (const auto& s : report.scans) {
    out << s.scan_id << ',';
    if (s.id_total) {
      out << s.id_correct.value_or(0) << ',' << *s.id_total << ',' << csv_num(s.id_rate()) << ',' << csv_num(s.d_sum_mm);
    } else {
      out << ",,,";
    }
    out << ',' << counts(s.edges) << ',' << counts(s.illegitimacy) << '\n';
  }
  const auto a = report.aggregate();
  out << "ALL,,," << csv_num(a.identification_rate) << ",,,,," << csv_num(a.edge_f1) << ",,,,"
      << csv_num(a.illegitimacy_f1) << '\n';
  return out.str();
}

void save_report(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write report " + path);
  out << (ends_with(path, ".csv") ? report_to_csv(report) : report_to_json(report));
  out.flush();
  if (!out) throw IoError("failed writing report " + path);
}

EvalReport load_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read report " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return report_from_json(ss.str());
}

Comparison compare(const EvalReport& a, const EvalReport& b) {
  Comparison c;
  c.method_a = a.method;
  c.method_b = b.method;
  c.hard_subset = metrics::hard_subset({&a, &b});
  c.scans = a.scans.size();
  c.a_full = a.aggregate();
  c.b_full = b.aggregate();
  c.a_hard = a.aggregate(&c.hard_subset);
  c.b_hard = b.aggregate(&c.hard_subset);

  auto add = [&](const std::string& name, auto score, std::optional<double> metrics::Aggregate::*field) {
    std::vector<double> xa, xb;
    for (std::size_t i = 0; i < a.scans.size(); ++i) {
      const auto sa = score(a.scans[i]);
      const auto sb = score(b.scans[i]);
      if (!sa || !sb) return;
      xa.push_back(*sa);
      xb.push_back(*sb);
    }
    if (a.scans.empty()) return;
    MetricComparison m;
    m.metric = name;
    m.a_full = c.a_full.*field;
    m.b_full = c.b_full.*field;
    m.a_hard = c.a_hard.*field;
    m.b_hard = c.b_hard.*field;
    m.wilcoxon = stats::wilcoxon_signed_rank(xa, xb);
    c.metrics.push_back(std::move(m));
  };
  add("identification_rate", [](const ScanReport& s) { return s.id_rate(); }, &metrics::Aggregate::identification_rate);
  add("edge_f1",
      [](const ScanReport& s) { return s.edges ? std::optional<double>(s.edges->f1()) : std::nullopt; },
      &metrics::Aggregate::edge_f1);
  add("illegitimacy_f1",
      [](const ScanReport& s) { return s.illegitimacy ? std::optional<double>(s.illegitimacy->f1()) : std::nullopt; },
      &metrics::Aggregate::illegitimacy_f1);
  return c;
}

std::string comparison_to_json(const Comparison& c) {
  ordered_json doc;
  doc["methods"] = {c.method_a, c.method_b};
  doc["scans"] = c.scans;
  doc["hard_subset"] = c.hard_subset;
  doc["full"] = {{c.method_a, aggregate_json(c.a_full)}, {c.method_b, aggregate_json(c.b_full)}};
  doc["hard"] = {{c.method_a, aggregate_json(c.a_hard)}, {c.method_b, aggregate_json(c.b_hard)}};
  ordered_json tests = ordered_json::array();
  for (const auto& m : c.metrics) {
    ordered_json t;
    t["metric"] = m.metric;
    t["p_value"] = m.wilcoxon.p_value;
    t["w_plus"] = m.wilcoxon.w_plus;
    t["n_nonzero"] = m.wilcoxon.n;
    t["exact"] = m.wilcoxon.exact;
    tests.push_back(std::move(t));
  }
  doc["wilcoxon"] = std::move(tests);
  return doc.dump(1) + "\n";
}

std::string comparison_table(const Comparison& c) {
  std::ostringstream out;
  out << "scans: " << c.scans << "  hard subset: " << c.hard_subset.size() << "\n";
  out << std::left << std::setw(12) << "method" << std::setw(8) << "set" << std::right << std::setw(10) << "id rate"
      << std::setw(10) << "d_mean" << std::setw(10) << "edge F1" << std::setw(12) << "illegit F1" << "\n";
  auto row = [&](const std::string& method, const char* set, const metrics::Aggregate& a) {
    out << std::left << std::setw(12) << method << std::setw(8) << set << std::right << std::setw(10)
        << fmt(a.identification_rate, 100.0) << std::setw(10) << fmt(a.d_mean_mm) << std::setw(10)
        << fmt(a.edge_f1, 100.0) << std::setw(12) << fmt(a.illegitimacy_f1, 100.0) << "\n";
  };
  row(c.method_a, "full", c.a_full);
  row(c.method_b, "full", c.b_full);
  row(c.method_a, "hard", c.a_hard);
  row(c.method_b, "hard", c.b_hard);
  for (const auto& m : c.metrics) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "wilcoxon %s: p = %.4g (n = %zu, %s)\n", m.metric.c_str(), m.wilcoxon.p_value,
                  m.wilcoxon.n, m.wilcoxon.exact ? "exact" : "normal");
    out << buf;
  }
  return out.str();
}

}  // namespace spinegnn::eval
