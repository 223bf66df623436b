#include "spinegnn/dataset.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "spinegnn/error.hpp"
#include "spinegnn/rng.hpp"

namespace spinegnn::dataset {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kFormatTag = "spinegnn-corpus";
constexpr int kFormatVersion = 1;

// Thrown while reading one record; becomes a diagnostic.
struct RecordError {
  std::string reason;
};

const json& field(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object()) throw RecordError{where + " is not an object"};
  const auto it = obj.find(key);
  if (it == obj.end()) throw RecordError{"missing field '" + key + "' in " + where};
  return *it;
}

double number(const json& v, const std::string& what) {
  if (!v.is_number()) throw RecordError{what + " is not a number"};
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw RecordError{what + " is not finite"};
  return d;
}

std::string text(const json& v, const std::string& what) {
  if (!v.is_string()) throw RecordError{what + " is not a string"};
  return v.get<std::string>();
}

Vec3 read_vec3(const json& v, const std::string& what) {
  if (!v.is_array() || v.size() != 3) throw RecordError{what + " must be an array of 3 numbers"};
  return {number(v[0], what), number(v[1], what), number(v[2], what)};
}

std::array<double, kNumSegments> read_probs(const json& v, const std::string& what) {
  if (!v.is_array() || v.size() != kNumSegments) throw RecordError{what + " must have 4 entries"};
  std::array<double, kNumSegments> p{};
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = number(v[i], what);
    if (p[i] < 0.0 || p[i] > 1.0) throw RecordError{what + " entries must lie in [0, 1]"};
  }
  return p;
}

template <typename F>
auto wrap_config(F&& f, const std::string& what) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw RecordError{what + ": " + e.what()};
  }
}

Keypoint read_internal_keypoint(const json& j, const std::string& where) {
  Keypoint kp;
  kp.position = read_vec3(field(j, "pos", where), where + ".pos");
  const std::string kind = text(field(j, "kind", where), where + ".kind");
  kp.kind = wrap_config([&] { return parse_keypoint_type(kind); }, where);
  if (const auto it = j.find("level"); it != j.end() && !it->is_null()) {
    const std::string lv = text(*it, where + ".level");
    kp.level = wrap_config([&] { return SpineLevel::from_name(lv); }, where);
  }
  const json& legit = field(j, "legitimate", where);
  if (!legit.is_boolean()) throw RecordError{where + ".legitimate is not a boolean"};
  kp.legitimate = legit.get<bool>();
  kp.segment_probs = read_probs(field(j, "segment_probs", where), where + ".segment_probs");
  if (const auto it = j.find("source_id"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw RecordError{where + ".source_id is not an integer"};
    kp.source_id = it->get<int>();
  }
  return kp;
}

std::vector<Keypoint> read_internal_list(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw RecordError{where + " is not an array"};
  std::vector<Keypoint> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(read_internal_keypoint(arr[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

ScanRecord read_internal_record(const json& j) {
  ScanRecord r;
  r.scan_id = text(field(j, "id", "record"), "id");
  const std::string split = text(field(j, "split", "record"), "split");
  r.split = wrap_config([&] { return parse_split(split); }, "split");
  if (const auto it = j.find("provenance"); it != j.end()) {
    const std::string prov = text(*it, "provenance");
    r.provenance = wrap_config([&] { return parse_provenance(prov); }, "provenance");
  }
  r.keypoints = read_internal_list(field(j, "keypoints", "record"), "keypoints");
  if (const auto it = j.find("ground_truth"); it != j.end() && !it->is_null()) {
    r.ground_truth = read_internal_list(*it, "ground_truth");
  }
  return r;
}

ScanRecord read_external_record(const json& j, const ExternalMapping& m) {
  ScanRecord r;
  r.provenance = Provenance::external;
  const json& id = field(j, m.id_key, "record");
  r.scan_id = id.is_number_integer() ? std::to_string(id.get<long long>()) : text(id, m.id_key);
  if (const auto it = j.find(m.split_key); it != j.end()) {
    const std::string split = text(*it, m.split_key);
    r.split = wrap_config([&] { return parse_split(split); }, m.split_key);
  }
  const json& arr = field(j, m.keypoints_key, "record");
  if (!arr.is_array()) throw RecordError{m.keypoints_key + " is not an array"};
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string where = m.keypoints_key + "[" + std::to_string(i) + "]";
    const json& kj = arr[i];
    Keypoint kp;
    if (m.xyz_keys) {
      for (int a = 0; a < 3; ++a) {
        const auto& key = (*m.xyz_keys)[static_cast<std::size_t>(a)];
        kp.position[a] = number(field(kj, key, where), where + "." + key);
      }
    } else {
      kp.position = read_vec3(field(kj, m.position_key, where), where + "." + m.position_key);
    }
    const std::string raw_kind = text(field(kj, m.kind_key, where), where + "." + m.kind_key);
    const auto alias = m.kind_aliases.find(raw_kind);
    if (alias == m.kind_aliases.end()) throw RecordError{where + ": unknown keypoint type '" + raw_kind + "'"};
    kp.kind = wrap_config([&] { return parse_keypoint_type(alias->second); }, where);
    if (const auto it = kj.find(m.level_key); it != kj.end() && !it->is_null()) {
      const std::string lv = text(*it, where + "." + m.level_key);
      kp.level = wrap_config([&] { return SpineLevel::from_name(lv); }, where);
    }
    if (const auto it = kj.find(m.legitimate_key); it != kj.end()) {
      if (!it->is_boolean()) throw RecordError{where + "." + m.legitimate_key + " is not a boolean"};
      kp.legitimate = it->get<bool>();
    }
    if (const auto it = kj.find(m.segment_probs_key); it != kj.end()) {
      kp.segment_probs = read_probs(*it, where + "." + m.segment_probs_key);
    } else if (kp.kind == KeypointType::body && kp.level) {
      kp.segment_probs[static_cast<std::size_t>(level_to_segment(*kp.level))] = 1.0;
    }
    r.keypoints.push_back(kp);
  }
  return r;
}

ordered_json keypoint_json(const Keypoint& kp) {
  ordered_json j;
  j["pos"] = {kp.position.x, kp.position.y, kp.position.z};
  j["kind"] = keypoint_type_name(kp.kind);
  if (kp.level) j["level"] = kp.level->name();
  j["legitimate"] = kp.legitimate;
  j["segment_probs"] = kp.segment_probs;
  if (kp.source_id) j["source_id"] = *kp.source_id;
  return j;
}

ordered_json keypoint_list_json(const std::vector<Keypoint>& kps) {
  ordered_json arr = ordered_json::array();
  for (const auto& kp : kps) arr.push_back(keypoint_json(kp));
  return arr;
}

std::optional<std::string> duplicate_level(const std::vector<Keypoint>& kps, const char* where) {
  std::set<int> seen;
  for (const auto& kp : kps) {
    if (kp.kind != KeypointType::body || !kp.legitimate || !kp.level) continue;
    if (!seen.insert(kp.level->index()).second) {
      return "duplicate level " + kp.level->name() + " among legitimate bodies in " + where;
    }
  }
  return std::nullopt;
}

}  // namespace

std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(s) + "'");
}

std::string_view provenance_name(Provenance p) { return p == Provenance::synthetic ? "synthetic" : "external"; }

Provenance parse_provenance(std::string_view s) {
  if (s == "synthetic") return Provenance::synthetic;
  if (s == "external") return Provenance::external;
  throw ConfigError("unknown provenance '" + std::string(s) + "'");
}

Format parse_format(std::string_view s) {
  if (s == "internal" || s == "internal_json" || s == "json") return Format::internal_json;
  if (s == "external") return Format::external;
  throw ConfigError("unknown corpus format '" + std::string(s) + "'");
}

std::vector<Keypoint> ScanRecord::truth() const {
  if (ground_truth) return *ground_truth;
  std::vector<Keypoint> out;
  for (const auto& kp : keypoints) {
    if (kp.legitimate) out.push_back(kp);
  }
  return out;
}

std::array<std::size_t, kNumLevels> Corpus::level_histogram() const {
  std::array<std::size_t, kNumLevels> h{};
  for (const auto& r : records) {
    for (const auto& kp : r.truth()) {
      if (kp.kind == KeypointType::body && kp.legitimate && kp.level) ++h[static_cast<std::size_t>(kp.level->index())];
    }
  }
  return h;
}

std::map<Split, std::size_t> Corpus::split_sizes() const {
  std::map<Split, std::size_t> m{{Split::train, 0}, {Split::val, 0}, {Split::test, 0}};
  for (const auto& r : records) ++m[r.split];
  return m;
}

std::vector<const ScanRecord*> Corpus::in_split(Split s) const {
  std::vector<const ScanRecord*> out;
  for (const auto& r : records) {
    if (r.split == s) out.push_back(&r);
  }
  return out;
}

ExternalMapping ExternalMapping::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("external mapping: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("external mapping: expected an object");
  ExternalMapping m;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "scans") m.scans_key = value.get<std::string>();
      else if (key == "id") m.id_key = value.get<std::string>();
      else if (key == "split") m.split_key = value.get<std::string>();
      else if (key == "keypoints") m.keypoints_key = value.get<std::string>();
      else if (key == "position") m.position_key = value.get<std::string>();
      else if (key == "xyz") m.xyz_keys = value.get<std::array<std::string, 3>>();
      else if (key == "kind") m.kind_key = value.get<std::string>();
      else if (key == "level") m.level_key = value.get<std::string>();
      else if (key == "segment_probs") m.segment_probs_key = value.get<std::string>();
      else if (key == "legitimate") m.legitimate_key = value.get<std::string>();
      else if (key == "kind_aliases") m.kind_aliases = value.get<std::map<std::string, std::string>>();
      else throw ConfigError("external mapping: unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("external mapping: ") + e.what());
  }
  return m;
}

std::optional<std::string> validate_record(const ScanRecord& record) {
  if (record.scan_id.empty()) return "empty scan id";
  if (auto d = duplicate_level(record.keypoints, "keypoints")) return d;
  if (record.ground_truth) {
    if (auto d = duplicate_level(*record.ground_truth, "ground_truth")) return d;
    for (const auto& kp : record.keypoints) {
      if (kp.source_id && (*kp.source_id < 0 || static_cast<std::size_t>(*kp.source_id) >= record.ground_truth->size())) {
        return "source_id " + std::to_string(*kp.source_id) + " outside ground_truth";
      }
    }
  }
  return std::nullopt;
}

LoadResult parse_corpus(const std::string& text, Format format, const ExternalMapping& mapping) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("corpus is not valid JSON: ") + e.what());
  }
  const std::string scans_key = format == Format::internal_json ? "scans" : mapping.scans_key;
  const json* scans = nullptr;
  if (doc.is_object()) {
    if (const auto it = doc.find(scans_key); it != doc.end()) scans = &*it;
  } else if (doc.is_array() && format == Format::external) {
    scans = &doc;
  }
  if (scans == nullptr || !scans->is_array()) throw IoError("corpus has no '" + scans_key + "' array");
  if (format == Format::internal_json && doc.contains("version")) {
    if (!doc["version"].is_number_integer() || doc["version"].get<int>() != kFormatVersion) {
      throw IoError("unsupported corpus version");
    }
  }

  LoadResult res;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < scans->size(); ++i) {
    const json& rj = (*scans)[i];
    std::string id;
    if (rj.is_object()) {
      const auto it = rj.find(format == Format::internal_json ? "id" : mapping.id_key);
      if (it != rj.end() && it->is_string()) id = it->get<std::string>();
    }
    try {
      ScanRecord r = format == Format::internal_json ? read_internal_record(rj) : read_external_record(rj, mapping);
      if (auto why = validate_record(r)) throw RecordError{*why};
      if (!ids.insert(r.scan_id).second) throw RecordError{"duplicate scan id"};
      res.corpus.records.push_back(std::move(r));
    } catch (const RecordError& e) {
      res.diagnostics.push_back({id, i, e.reason});
    } catch (const json::exception& e) {
      res.diagnostics.push_back({id, i, e.what()});
    }
  }
  return res;
}

LoadResult load_corpus(const std::string& path, Format format, const ExternalMapping& mapping) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read corpus " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_corpus(ss.str(), format, mapping);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

std::string corpus_to_json(const Corpus& corpus) {
  ordered_json doc;
  doc["format"] = kFormatTag;
  doc["version"] = kFormatVersion;
  doc["scans"] = ordered_json::array();
  for (const auto& r : corpus.records) {
    ordered_json rj;
    rj["id"] = r.scan_id;
    rj["split"] = split_name(r.split);
    rj["provenance"] = provenance_name(r.provenance);
    rj["keypoints"] = keypoint_list_json(r.keypoints);
    if (r.ground_truth) rj["ground_truth"] = keypoint_list_json(*r.ground_truth);
    doc["scans"].push_back(std::move(rj));
  }
  return doc.dump(1) + "\n";
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write corpus " + path);
  out << corpus_to_json(corpus);
  out.flush();
  if (!out) throw IoError("failed writing corpus " + path);
}

Corpus generate_corpus(const SyntheticCorpusConfig& config) {
  config.augmentation.validate();
  if (config.spacing_min_mm <= 0.0 || config.spacing_max_mm < config.spacing_min_mm) {
    throw ConfigError("generate: invalid spacing range");
  }
  Corpus corpus;
  corpus.records.reserve(config.scans);
  const SpineVariant variants[] = {SpineVariant::full, SpineVariant::no_T13_L6_S2, SpineVariant::no_T12_T13_L6_S2};
  for (std::size_t i = 0; i < config.scans; ++i) {
    Rng rng = make_rng(derive_seed(config.seed, 0xC0, i), 0);
    SyntheticSpineConfig sc;
    if (config.vary_anatomy) {
      sc.variant = variants[uniform_index(rng, 3)];
      sc.spacing_mm = uniform(rng, config.spacing_min_mm, config.spacing_max_mm);
      const std::size_t n = variant_levels(sc.variant).size();
      const std::size_t min_levels = std::min(std::max<std::size_t>(config.min_levels, 1), n);
      if (chance_pct(rng, config.crop_pct) && min_levels < n) {
        const std::size_t count = min_levels + uniform_index(rng, n - min_levels + 1);
        sc.first_level = uniform_index(rng, n - count + 1);
        sc.level_count = count;
      }
    }
    const auto base = generate_synthetic_spine(sc);
    AugmentedScan aug = augment_scan(base, config.augmentation, derive_seed(config.seed, 0xA0, i));
    if (aug.keypoints.size() < 2) aug.keypoints = aug.ground_truth;

    ScanRecord r;
    std::ostringstream id;
    id << config.id_prefix << '_';
    id.width(5);
    id.fill('0');
    id << i;
    r.scan_id = id.str();
    r.split = config.split;
    r.provenance = Provenance::synthetic;
    r.keypoints = std::move(aug.keypoints);
    r.ground_truth = std::move(aug.ground_truth);
    corpus.records.push_back(std::move(r));
  }
  return corpus;
}

}  // namespace spinegnn::dataset
