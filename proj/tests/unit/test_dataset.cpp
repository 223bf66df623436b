#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "spinegnn/dataset.hpp"
#include "spinegnn/error.hpp"

using namespace spinegnn;
using namespace spinegnn::dataset;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Corpus small_corpus(std::size_t n = 6, std::uint64_t seed = 1) {
  SyntheticCorpusConfig c;
  c.scans = n;
  c.seed = seed;
  return generate_corpus(c);
}

}  // namespace

TEST_CASE("save and load round-trip") {
  const Corpus c = small_corpus();
  const auto res = parse_corpus(corpus_to_json(c));
  CHECK(res.diagnostics.empty());
  CHECK(res.corpus == c);

  const auto path = temp_path("spinegnn_test_corpus.json");
  save_corpus(c, path);
  CHECK(load_corpus(path).corpus == c);
  const std::string first = read_file(path);
  save_corpus(load_corpus(path).corpus, path);
  CHECK(read_file(path) == first);
  std::filesystem::remove(path);
}

TEST_CASE("two saves of the same corpus are byte-identical") {
  CHECK(corpus_to_json(small_corpus()) == corpus_to_json(small_corpus()));
  CHECK(corpus_to_json(small_corpus(6, 1)) != corpus_to_json(small_corpus(6, 2)));
}

TEST_CASE("empty corpus saves to a loadable file") {
  const auto res = parse_corpus(corpus_to_json(Corpus{}));
  CHECK(res.corpus.records.empty());
  CHECK(res.diagnostics.empty());
}

TEST_CASE("malformed records are rejected with diagnostics") {
  const std::string doc = R"({"scans": [
    {"id": "ok", "split": "val", "keypoints": [
      {"pos": [0, 0, 0], "kind": "body", "level": "C1", "legitimate": true, "segment_probs": [1, 0, 0, 0]}]},
    {"id": "no_pos", "split": "train", "keypoints": [
      {"kind": "body", "level": "C2", "legitimate": true, "segment_probs": [1, 0, 0, 0]}]},
    {"id": "bad_kind", "split": "train", "keypoints": [
      {"pos": [0, 0, 0], "kind": "spinous", "legitimate": true, "segment_probs": [0, 0, 0, 0]}]},
    {"id": "bad_level", "split": "train", "keypoints": [
      {"pos": [0, 0, 0], "kind": "body", "level": "T14", "legitimate": true, "segment_probs": [0, 1, 0, 0]}]},
    {"id": "dup_level", "split": "train", "keypoints": [
      {"pos": [0, 0, 0], "kind": "body", "level": "L1", "legitimate": true, "segment_probs": [0, 0, 1, 0]},
      {"pos": [0, 0, 30], "kind": "body", "level": "L1", "legitimate": true, "segment_probs": [0, 0, 1, 0]}]},
    {"id": "ok", "split": "train", "keypoints": []},
    {"id": "bad_split", "split": "holdout", "keypoints": []},
    42
  ]})";
  const auto res = parse_corpus(doc);
  REQUIRE(res.corpus.records.size() == 1);
  CHECK(res.corpus.records[0].scan_id == "ok");
  CHECK(res.corpus.records[0].split == Split::val);
  REQUIRE(res.diagnostics.size() == 7);
  CHECK(res.diagnostics[0].scan_id == "no_pos");
  CHECK(res.diagnostics[0].record_index == 1);
  CHECK(res.diagnostics[0].reason.find("pos") != std::string::npos);
  CHECK(res.diagnostics[3].reason.find("L1") != std::string::npos);
  CHECK(res.diagnostics[4].reason.find("duplicate") != std::string::npos);
  CHECK(res.diagnostics[6].scan_id.empty());
}

TEST_CASE("unreadable documents throw IoError") {
  CHECK_THROWS_AS(parse_corpus("not json"), IoError);
  CHECK_THROWS_AS(parse_corpus("{\"records\": []}"), IoError);
  CHECK_THROWS_AS(parse_corpus("{\"scans\": [], \"version\": 99}"), IoError);
  CHECK_THROWS_AS(load_corpus(temp_path("spinegnn_missing_corpus.json")), IoError);
}

TEST_CASE("duplicate levels are allowed among illegitimate clones") {
  ScanRecord r;
  r.scan_id = "s";
  r.keypoints = generate_synthetic_spine({});
  Keypoint clone = r.keypoints[0];
  clone.legitimate = false;
  r.keypoints.push_back(clone);
  CHECK_FALSE(validate_record(r).has_value());
  r.keypoints.back().legitimate = true;
  CHECK(validate_record(r).has_value());
  r.keypoints.pop_back();
  r.ground_truth = r.keypoints;
  r.keypoints[0].source_id = 500;
  CHECK(validate_record(r).has_value());
}

TEST_CASE("generated corpus: deterministic histogram, splits, ids") {
  const Corpus a = small_corpus(100, 7), b = small_corpus(100, 7);
  CHECK(a.level_histogram() == b.level_histogram());
  CHECK(a.records.size() == 100);
  CHECK(a.records[0].scan_id == "scan_00000");
  CHECK(a.records[99].scan_id == "scan_00099");
  CHECK(a.split_sizes().at(Split::train) == 100);
  CHECK(a.in_split(Split::val).empty());
  std::size_t c1 = a.level_histogram()[0];
  CHECK(c1 > 50);
  CHECK(c1 <= 100);
  for (const auto& r : a.records) {
    REQUIRE(r.ground_truth.has_value());
    CHECK_FALSE(validate_record(r).has_value());
  }
}

TEST_CASE("clean fixed-anatomy generation gives model spines") {
  SyntheticCorpusConfig c;
  c.scans = 10;
  c.augmentation = AugmentationConfig::preset(AugmentationLevel::none);
  c.vary_anatomy = false;
  const Corpus corpus = generate_corpus(c);
  REQUIRE(corpus.records.size() == 10);
  for (const auto& r : corpus.records) {
    CHECK(r.keypoints == generate_synthetic_spine({}));
    CHECK(r.truth() == r.keypoints);
  }
}

TEST_CASE("external adapter with a field mapping") {
  const auto mapping = ExternalMapping::from_json(R"({
    "scans": "cases", "id": "case", "keypoints": "points", "xyz": ["X", "Y", "Z"],
    "kind": "label", "level": "vertebra", "kind_aliases": {"VB": "body", "PL": "left_pedicle", "PR": "right_pedicle"}
  })");
  const std::string doc = R"({"cases": [
    {"case": 17, "points": [
      {"X": 1, "Y": 2, "Z": 3, "label": "VB", "vertebra": "T4"},
      {"X": 10, "Y": 2, "Z": 3, "label": "PL", "vertebra": "T4"},
      {"X": -8, "Y": 2, "Z": 3, "label": "PR", "vertebra": "T4"}]},
    {"case": "bad", "points": [{"X": 1, "Y": 2, "Z": 3, "label": "XX"}]}
  ]})";
  const auto res = parse_corpus(doc, Format::external, mapping);
  REQUIRE(res.corpus.records.size() == 1);
  REQUIRE(res.diagnostics.size() == 1);
  const auto& r = res.corpus.records[0];
  CHECK(r.scan_id == "17");
  CHECK(r.provenance == Provenance::external);
  REQUIRE(r.keypoints.size() == 3);
  CHECK(r.keypoints[0].position == Vec3{1, 2, 3});
  CHECK(r.keypoints[0].level->name() == "T4");
  CHECK(r.keypoints[0].segment_probs[1] == 1.0);
  CHECK(r.keypoints[1].kind == KeypointType::left_pedicle);
  CHECK_THROWS_AS(ExternalMapping::from_json(R"({"nope": "x"})"), ConfigError);
  CHECK(parse_format("json") == Format::internal_json);
  CHECK(parse_format("external") == Format::external);
  CHECK_THROWS_AS(parse_format("csv"), ConfigError);
}
