#pragma once

// Anatomical domain: vertebra levels, spine segments, keypoint kinds, and the synthetic
// straight-line model spines.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spinegnn/vec3.hpp"

namespace spinegnn {

inline constexpr int kNumLevels = 28;
inline constexpr int kNumSegments = 4;
inline constexpr int kNumKeypointTypes = 3;

enum class Segment : std::uint8_t { cervical = 0, thoracic = 1, lumbar = 2, sacral = 3 };

enum class KeypointType : std::uint8_t { body = 0, left_pedicle = 1, right_pedicle = 2 };

/// One of the 28 levels C1-C7, T1-T13, L1-L6, S1-S2 in anatomical (cranial to caudal) order.
class SpineLevel {
 public:
  constexpr SpineLevel() = default;
  /// Throws ConfigError outside [0, 27].
  explicit SpineLevel(int index);

  constexpr int index() const { return index_; }
  std::string name() const;
  /// Parses "C1" ... "S2".
  static SpineLevel from_name(std::string_view name);

  constexpr auto operator<=>(const SpineLevel&) const = default;

 private:
  int index_ = 0;
};

Segment level_to_segment(SpineLevel level);

std::string_view segment_name(Segment s);
std::string_view keypoint_type_name(KeypointType k);
KeypointType parse_keypoint_type(std::string_view name);

struct Keypoint {
  Vec3 position;  // millimetres
  KeypointType kind = KeypointType::body;
  std::optional<SpineLevel> level;
  bool legitimate = true;
  /// Independent pseudo-probabilities in [0, 1], indexed by Segment.
  std::array<double, kNumSegments> segment_probs{};
  /// Index of the ground-truth keypoint this detection stems from.
  std::optional<int> source_id;

  bool operator==(const Keypoint&) const = default;
};

enum class SpineVariant { full, no_T13_L6_S2, no_T12_T13_L6_S2 };

std::string_view variant_name(SpineVariant v);
SpineVariant parse_variant(std::string_view name);
/// Levels present in the given variant, in anatomical order.
std::vector<SpineLevel> variant_levels(SpineVariant v);

struct SyntheticSpineConfig {
  SpineVariant variant = SpineVariant::full;
  double spacing_mm = 30.0;
  /// Offset of the left pedicle from its body; the right pedicle mirrors x.
  Vec3 pedicle_offset{12.0, -15.0, 0.0};
  /// Position of the first (most cranial) body.
  Vec3 origin{0.0, 0.0, 0.0};
  /// Optional contiguous sub-range of the variant's levels, [first, first + count).
  std::size_t first_level = 0;
  std::optional<std::size_t> level_count;
};

/// Straight model spine along -z: one body per level at `spacing_mm` intervals, with a left and
/// right pedicle per body. Keypoints are ordered body, left, right per vertebra, and each carries
/// its own index as source_id. Bodies get a one-hot segment vector; pedicles all zeros.
/// The seed is accepted for interface symmetry; generation is deterministic.
std::vector<Keypoint> generate_synthetic_spine(const SyntheticSpineConfig& config,
                                               std::uint64_t rng_seed = 0);

/// The three model spines (full / without T13, L6, S2 / without T12, T13, L6, S2).
std::vector<std::vector<Keypoint>> model_spines(double spacing_mm = 30.0);

/// Index of the largest segment pseudo-probability (first wins ties).
Segment observed_segment(const Keypoint& kp);

}  // namespace spinegnn
