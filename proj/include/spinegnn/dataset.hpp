#pragma once

// Keypoint corpora: the internal JSON format, an adapter for external keypoint files, and
// synthetic corpus generation.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spinegnn/augment.hpp"
#include "spinegnn/spine.hpp"

namespace spinegnn::dataset {

enum class Split { train, val, test };
enum class Provenance { synthetic, external };
enum class Format { internal_json, external };

std::string_view split_name(Split s);
Split parse_split(std::string_view s);
std::string_view provenance_name(Provenance p);
Provenance parse_provenance(std::string_view s);
Format parse_format(std::string_view s);

struct ScanRecord {
  std::string scan_id;
  Split split = Split::train;
  Provenance provenance = Provenance::synthetic;
  /// Detections as seen by the methods, labelled with their true level / legitimacy.
  std::vector<Keypoint> keypoints;
  /// Anatomical ground truth the detections' source_id refers to. When absent the legitimate
  /// detections stand in for it.
  std::optional<std::vector<Keypoint>> ground_truth;

  bool operator==(const ScanRecord&) const = default;

  /// ground_truth if present, otherwise the legitimate keypoints.
  std::vector<Keypoint> truth() const;
};

struct Corpus {
  std::vector<ScanRecord> records;

  /// Legitimate ground-truth bodies per level.
  std::array<std::size_t, kNumLevels> level_histogram() const;
  std::map<Split, std::size_t> split_sizes() const;
  std::vector<const ScanRecord*> in_split(Split s) const;

  bool operator==(const Corpus&) const = default;
};

struct Diagnostic {
  std::string scan_id;  // empty when the record has no readable id
  std::size_t record_index = 0;
  std::string reason;
};

struct LoadResult {
  Corpus corpus;
  /// One entry per rejected record.
  std::vector<Diagnostic> diagnostics;
};

/// Field names of an external keypoint file. Positions are either one array field or three
/// scalar fields; kind values are translated through `kind_aliases`.
struct ExternalMapping {
  std::string scans_key = "scans";
  std::string id_key = "id";
  std::string split_key = "split";
  std::string keypoints_key = "keypoints";
  std::string position_key = "position";
  std::optional<std::array<std::string, 3>> xyz_keys;
  std::string kind_key = "type";
  std::string level_key = "level";
  std::string segment_probs_key = "segment_probs";
  std::string legitimate_key = "legitimate";
  std::map<std::string, std::string> kind_aliases = {
      {"body", "body"}, {"left_pedicle", "left_pedicle"}, {"right_pedicle", "right_pedicle"}};

  static ExternalMapping from_json(const std::string& text);
};

/// Parses a corpus. Malformed records (missing fields, unknown kinds or levels, duplicate levels
/// among legitimate bodies, duplicate ids) are dropped and reported. Throws IoError when the
/// document itself is unreadable.
LoadResult parse_corpus(const std::string& text, Format format = Format::internal_json,
                        const ExternalMapping& mapping = {});
LoadResult load_corpus(const std::string& path, Format format = Format::internal_json,
                       const ExternalMapping& mapping = {});

/// Canonical JSON: fixed key order, shortest round-trip number formatting.
std::string corpus_to_json(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::string& path);

/// Checks one record; returns the reason it is invalid, if any.
std::optional<std::string> validate_record(const ScanRecord& record);

struct SyntheticCorpusConfig {
  std::size_t scans = 10;
  AugmentationConfig augmentation = AugmentationConfig::preset(AugmentationLevel::default_);
  std::uint64_t seed = 0;
  Split split = Split::train;
  std::string id_prefix = "scan";
  /// Per-scan anatomy variation: random variant, spacing in [spacing_min, spacing_max], and with
  /// probability crop_pct a contiguous crop of at least min_levels levels.
  bool vary_anatomy = true;
  double spacing_min_mm = 26.0;
  double spacing_max_mm = 34.0;
  double crop_pct = 30.0;
  std::size_t min_levels = 12;
};

/// Base spine per scan (the ground truth) plus its augmented detections.
Corpus generate_corpus(const SyntheticCorpusConfig& config);

}  // namespace spinegnn::dataset
