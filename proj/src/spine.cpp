#include "spinegnn/spine.hpp"

#include <algorithm>

#include "spinegnn/error.hpp"

namespace spinegnn {

namespace {

struct SegmentRange {
  char prefix;
  int first;
  int count;
  Segment segment;
};

constexpr std::array<SegmentRange, 4> kRanges{{
    {'C', 0, 7, Segment::cervical},
    {'T', 7, 13, Segment::thoracic},
    {'L', 20, 6, Segment::lumbar},
    {'S', 26, 2, Segment::sacral},
}};

const SegmentRange& range_of(int index) {
  for (const auto& r : kRanges) {
    if (index >= r.first && index < r.first + r.count) return r;
  }
  throw ConfigError("level index out of range: " + std::to_string(index));
}

}  // namespace

SpineLevel::SpineLevel(int index) : index_(index) {
  if (index < 0 || index >= kNumLevels) {
    throw ConfigError("level index out of range: " + std::to_string(index));
  }
}

std::string SpineLevel::name() const {
  const auto& r = range_of(index_);
  return std::string(1, r.prefix) + std::to_string(index_ - r.first + 1);
}

SpineLevel SpineLevel::from_name(std::string_view name) {
  if (name.size() >= 2) {
    for (const auto& r : kRanges) {
      if (name[0] != r.prefix) continue;
      int n = 0;
      for (char c : name.substr(1)) {
        if (c < '0' || c > '9') throw ConfigError("unknown level '" + std::string(name) + "'");
        n = n * 10 + (c - '0');
      }
      if (n >= 1 && n <= r.count) return SpineLevel(r.first + n - 1);
    }
  }
  throw ConfigError("unknown level '" + std::string(name) + "'");
}

Segment level_to_segment(SpineLevel level) { return range_of(level.index()).segment; }

std::string_view segment_name(Segment s) {
  switch (s) {
    case Segment::cervical: return "cervical";
    case Segment::thoracic: return "thoracic";
    case Segment::lumbar: return "lumbar";
    case Segment::sacral: return "sacral";
  }
  return "?";
}

std::string_view keypoint_type_name(KeypointType k) {
  switch (k) {
    case KeypointType::body: return "body";
    case KeypointType::left_pedicle: return "left_pedicle";
    case KeypointType::right_pedicle: return "right_pedicle";
  }
  return "?";
}

KeypointType parse_keypoint_type(std::string_view name) {
  if (name == "body") return KeypointType::body;
  if (name == "left_pedicle") return KeypointType::left_pedicle;
  if (name == "right_pedicle") return KeypointType::right_pedicle;
  throw ConfigError("unknown keypoint type '" + std::string(name) + "'");
}

std::string_view variant_name(SpineVariant v) {
  switch (v) {
    case SpineVariant::full: return "full";
    case SpineVariant::no_T13_L6_S2: return "no_T13_L6_S2";
    case SpineVariant::no_T12_T13_L6_S2: return "no_T12_T13_L6_S2";
  }
  return "?";
}

SpineVariant parse_variant(std::string_view name) {
  for (auto v : {SpineVariant::full, SpineVariant::no_T13_L6_S2, SpineVariant::no_T12_T13_L6_S2}) {
    if (variant_name(v) == name) return v;
  }
  throw ConfigError("unknown spine variant '" + std::string(name) + "'");
}

std::vector<SpineLevel> variant_levels(SpineVariant v) {
  std::vector<std::string_view> skip;
  if (v == SpineVariant::no_T13_L6_S2) skip = {"T13", "L6", "S2"};
  if (v == SpineVariant::no_T12_T13_L6_S2) skip = {"T12", "T13", "L6", "S2"};
  std::vector<SpineLevel> out;
  for (int i = 0; i < kNumLevels; ++i) {
    const SpineLevel l(i);
    if (std::find(skip.begin(), skip.end(), l.name()) == skip.end()) out.push_back(l);
  }
  return out;
}

std::vector<Keypoint> generate_synthetic_spine(const SyntheticSpineConfig& config,
                                               std::uint64_t /*rng_seed*/) {
  if (!(config.spacing_mm > 0.0)) throw ConfigError("spine spacing must be positive");
  const std::vector<SpineLevel> all = variant_levels(config.variant);
  const std::size_t first = std::min(config.first_level, all.size());
  const std::size_t count = std::min(config.level_count.value_or(all.size()), all.size() - first);

  std::vector<Keypoint> out;
  out.reserve(count * 3);
  for (std::size_t i = 0; i < count; ++i) {
    const SpineLevel level = all[first + i];
    const Vec3 center = config.origin + Vec3{0.0, 0.0, -config.spacing_mm * static_cast<double>(i)};

    Keypoint body;
    body.position = center;
    body.kind = KeypointType::body;
    body.level = level;
    body.segment_probs[static_cast<std::size_t>(level_to_segment(level))] = 1.0;

    Keypoint left;
    left.position = center + config.pedicle_offset;
    left.kind = KeypointType::left_pedicle;
    left.level = level;

    Keypoint right = left;
    right.position = center + Vec3{-config.pedicle_offset.x, config.pedicle_offset.y,
                                   config.pedicle_offset.z};
    right.kind = KeypointType::right_pedicle;

    for (Keypoint* kp : {&body, &left, &right}) {
      kp->source_id = static_cast<int>(out.size());
      out.push_back(*kp);
    }
  }
  return out;
}

std::vector<std::vector<Keypoint>> model_spines(double spacing_mm) {
  std::vector<std::vector<Keypoint>> out;
  for (auto v : {SpineVariant::full, SpineVariant::no_T13_L6_S2, SpineVariant::no_T12_T13_L6_S2}) {
    SyntheticSpineConfig cfg;
    cfg.variant = v;
    cfg.spacing_mm = spacing_mm;
    out.push_back(generate_synthetic_spine(cfg));
  }
  return out;
}

Segment observed_segment(const Keypoint& kp) {
  std::size_t best = 0;
  for (std::size_t s = 1; s < kp.segment_probs.size(); ++s) {
    if (kp.segment_probs[s] > kp.segment_probs[best]) best = s;
  }
  return static_cast<Segment>(best);
}

}  // namespace spinegnn
