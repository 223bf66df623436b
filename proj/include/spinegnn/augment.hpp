#pragma once

// Augmentation model emulating noisy keypoint detections. Rows are applied in a fixed order:
//   1. falsify segment label        5. mirror along x (whole graph)
//   2. delete body / pedicle        6. scale x / z (whole graph)
//   3. clone + displace, near       7. rotate about z, y, x (whole graph)
//   4. clone + displace, far        8. Gaussian perturbation, truncated
// Per-node rows draw independently for every keypoint; whole-graph rows draw once.
// Probabilities are percentages, distances millimetres, angles degrees.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "spinegnn/rng.hpp"
#include "spinegnn/spine.hpp"

namespace spinegnn {

enum class AugmentationLevel { none, light, default_, heavy };

std::string_view augmentation_level_name(AugmentationLevel l);
AugmentationLevel parse_augmentation_level(std::string_view name);

struct AugmentationConfig {
  double falsify_pct = 0.0;

  double delete_body_pct = 0.0;
  double delete_pedicle_pct = 0.0;

  double near_clone_body_pct = 0.0;
  double near_clone_pedicle_pct = 0.0;
  double near_clone_min_mm = 5.0;
  double near_clone_max_mm = 30.0;

  double far_clone_body_pct = 0.0;
  double far_clone_pedicle_pct = 0.0;
  double far_clone_min_mm = 200.0;
  double far_clone_max_mm = 500.0;

  double mirror_pct = 0.0;

  double scale_pct = 0.0;
  double scale_x_min = 0.8;
  double scale_x_max = 1.2;
  double scale_z_min = 0.5;
  double scale_z_max = 1.5;

  double rotate_pct = 0.0;
  double rotate_z_max_deg = 20.0;
  double rotate_y_max_deg = 20.0;
  double rotate_x_max_deg = 40.0;

  double perturb_pct = 0.0;
  double perturb_max_mm = 0.0;

  static AugmentationConfig preset(AugmentationLevel level);

  /// Throws ConfigError for probabilities outside [0, 100] or inverted ranges.
  void validate() const;

  bool operator==(const AugmentationConfig&) const = default;
};

/// Serialises as `key = value` lines with `#` comments.
std::string to_config_text(const AugmentationConfig& config);
/// Parses `key = value` lines. A `level = <name>` line, if present, must come first and loads
/// the preset that following keys override. Unknown keys are errors.
AugmentationConfig parse_config_text(std::string_view text);
AugmentationConfig load_augmentation_config(const std::string& path);
void save_augmentation_config(const AugmentationConfig& config, const std::string& path);

/// Applies the augmentation rows to a copy of `keypoints`. Throws ConfigError for empty input.
std::vector<Keypoint> augment(const std::vector<Keypoint>& keypoints,
                              const AugmentationConfig& config, std::uint64_t rng_seed);

struct AugmentedScan {
  std::vector<Keypoint> keypoints;
  /// The input keypoints moved by the same whole-graph transforms, without per-node noise.
  /// Detections refer to it through source_id.
  std::vector<Keypoint> ground_truth;
};

/// augment() that also returns the transformed ground truth.
AugmentedScan augment_scan(const std::vector<Keypoint>& keypoints, const AugmentationConfig& config,
                           std::uint64_t rng_seed);

/// Individual rows, exposed for testing. Each takes the row's own generator.
namespace augment_rows {
void falsify_segments(std::vector<Keypoint>& kps, double pct, Rng& rng);
void delete_keypoints(std::vector<Keypoint>& kps, double body_pct, double pedicle_pct, Rng& rng);
void clone_and_displace(std::vector<Keypoint>& kps, double body_pct, double pedicle_pct,
                        double min_mm, double max_mm, Rng& rng);
/// Reflects x about the keypoints' mean x and swaps left/right pedicle labels.
void mirror_x(std::vector<Keypoint>& kps);
void mirror_x(std::vector<Keypoint>& kps, const Vec3& center);
void scale_xz(std::vector<Keypoint>& kps, double cx, double cz);
void scale_xz(std::vector<Keypoint>& kps, double cx, double cz, const Vec3& center);
void rotate(std::vector<Keypoint>& kps, double z_rad, double y_rad, double x_rad);
void rotate(std::vector<Keypoint>& kps, double z_rad, double y_rad, double x_rad, const Vec3& center);
void perturb(std::vector<Keypoint>& kps, double pct, double max_mm, Rng& rng);
Vec3 centroid(const std::vector<Keypoint>& kps);
}  // namespace augment_rows

}  // namespace spinegnn
