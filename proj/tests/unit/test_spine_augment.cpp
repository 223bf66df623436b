#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spinegnn/augment.hpp"
#include "spinegnn/error.hpp"
#include "spinegnn/spine.hpp"

using namespace spinegnn;

namespace {

std::size_t count_kind(const std::vector<Keypoint>& kps, KeypointType k) {
  return static_cast<std::size_t>(std::count_if(kps.begin(), kps.end(), [&](const Keypoint& p) { return p.kind == k; }));
}

std::vector<Keypoint> full_spine() { return generate_synthetic_spine({}); }

}  // namespace

TEST_CASE("levels and segments") {
  CHECK(level_to_segment(SpineLevel::from_name("C1")) == Segment::cervical);
  CHECK(level_to_segment(SpineLevel::from_name("T13")) == Segment::thoracic);
  CHECK(level_to_segment(SpineLevel::from_name("L6")) == Segment::lumbar);
  CHECK(level_to_segment(SpineLevel::from_name("S2")) == Segment::sacral);
  CHECK(SpineLevel(0).name() == "C1");
  CHECK(SpineLevel(27).name() == "S2");
  for (int i = 0; i < kNumLevels; ++i) CHECK(SpineLevel::from_name(SpineLevel(i).name()).index() == i);
  CHECK_THROWS_AS(SpineLevel(28), ConfigError);
  CHECK_THROWS_AS(SpineLevel(-1), ConfigError);
  CHECK_THROWS_AS(SpineLevel::from_name("T14"), ConfigError);
  CHECK(parse_keypoint_type(keypoint_type_name(KeypointType::left_pedicle)) == KeypointType::left_pedicle);
}

TEST_CASE("full synthetic spine: 28 bodies over 810 mm, 84 keypoints") {
  const auto kps = full_spine();
  CHECK(kps.size() == 84);
  CHECK(count_kind(kps, KeypointType::body) == 28);
  double zmin = 1e9, zmax = -1e9;
  for (const auto& kp : kps) {
    if (kp.kind != KeypointType::body) continue;
    zmin = std::min(zmin, kp.position.z);
    zmax = std::max(zmax, kp.position.z);
  }
  CHECK(zmax - zmin == doctest::Approx(810.0));
  for (std::size_t i = 0; i < kps.size(); ++i) {
    CHECK(kps[i].source_id == static_cast<int>(i));
    CHECK(kps[i].legitimate);
    REQUIRE(kps[i].level.has_value());
  }
  CHECK(kps[0].segment_probs[0] == 1.0);
  CHECK(observed_segment(kps[3 * 20]) == Segment::lumbar);
}

TEST_CASE("variants and determinism") {
  SyntheticSpineConfig c;
  c.variant = SpineVariant::no_T12_T13_L6_S2;
  const auto kps = generate_synthetic_spine(c, 5);
  CHECK(kps.size() == 72);
  CHECK(count_kind(kps, KeypointType::body) == 24);
  CHECK(variant_levels(SpineVariant::no_T13_L6_S2).size() == 25);
  CHECK(generate_synthetic_spine(c, 5) == generate_synthetic_spine(c, 5));
  CHECK(parse_variant(variant_name(SpineVariant::no_T13_L6_S2)) == SpineVariant::no_T13_L6_S2);

  const auto ms = model_spines();
  REQUIRE(ms.size() == 3);
  CHECK(ms[0].size() == 84);
  CHECK(ms[1].size() == 75);
  CHECK(ms[2].size() == 72);

  c.first_level = 3;
  c.level_count = 10;
  const auto cropped = generate_synthetic_spine(c);
  CHECK(cropped.size() == 30);
  CHECK(cropped[0].level->name() == "C4");
}

TEST_CASE("augmentation presets") {
  const auto d = AugmentationConfig::preset(AugmentationLevel::default_);
  CHECK(d.near_clone_body_pct == 10.0);
  CHECK(d.near_clone_pedicle_pct == 10.0);
  CHECK(d.far_clone_body_pct == 10.0);
  CHECK(d.falsify_pct == 1.0);
  CHECK(d.delete_body_pct == 2.0);
  CHECK(d.delete_pedicle_pct == 5.0);
  CHECK(d.mirror_pct == 50.0);
  CHECK(d.scale_pct == 10.0);
  CHECK(d.rotate_pct == 10.0);
  CHECK(d.perturb_pct == 50.0);
  CHECK(d.perturb_max_mm == 2.0);
  CHECK(d.near_clone_min_mm == 5.0);
  CHECK(d.near_clone_max_mm == 30.0);
  CHECK(d.far_clone_min_mm == 200.0);
  CHECK(d.far_clone_max_mm == 500.0);

  const auto l = AugmentationConfig::preset(AugmentationLevel::light);
  CHECK(l.delete_pedicle_pct == 2.0);
  CHECK(l.perturb_pct == 20.0);
  CHECK(l.perturb_max_mm == 1.0);
  const auto h = AugmentationConfig::preset(AugmentationLevel::heavy);
  CHECK(h.delete_body_pct == 7.5);
  CHECK(h.delete_pedicle_pct == 15.0);
  CHECK(h.scale_pct == 30.0);
  CHECK(h.perturb_max_mm == 4.0);
  CHECK(AugmentationConfig::preset(AugmentationLevel::none) == AugmentationConfig{});
}

TEST_CASE("level none returns the input unchanged") {
  const auto kps = full_spine();
  for (std::uint64_t s = 0; s < 5; ++s) CHECK(augment(kps, AugmentationConfig{}, s) == kps);
  CHECK_THROWS_AS(augment({}, AugmentationConfig{}, 0), ConfigError);
}

TEST_CASE("augmentation is deterministic per seed") {
  const auto kps = full_spine();
  const auto cfg = AugmentationConfig::preset(AugmentationLevel::heavy);
  CHECK(augment(kps, cfg, 42) == augment(kps, cfg, 42));
  CHECK_FALSE(augment(kps, cfg, 42) == augment(kps, cfg, 43));
}

TEST_CASE("mirroring swaps pedicle sides and keeps body count") {
  auto kps = full_spine();
  const auto orig = kps;
  augment_rows::mirror_x(kps);
  CHECK(count_kind(kps, KeypointType::body) == 28);
  for (std::size_t i = 0; i < kps.size(); ++i) {
    if (orig[i].kind == KeypointType::left_pedicle) CHECK(kps[i].kind == KeypointType::right_pedicle);
    if (orig[i].kind == KeypointType::right_pedicle) CHECK(kps[i].kind == KeypointType::left_pedicle);
    CHECK(kps[i].position.y == orig[i].position.y);
  }
  augment_rows::mirror_x(kps);
  for (std::size_t i = 0; i < kps.size(); ++i) {
    CHECK(kps[i].kind == orig[i].kind);
    CHECK(std::abs(kps[i].position.x - orig[i].position.x) <= 1e-9);
  }

  AugmentationConfig always;
  always.mirror_pct = 100.0;
  const auto scan = augment_scan(orig, always, 3);
  for (std::size_t i = 0; i < orig.size(); ++i) CHECK(scan.keypoints[i] == scan.ground_truth[i]);
}

TEST_CASE("clones are illegitimate copies at the requested distance") {
  auto kps = full_spine();
  Rng rng(7);
  augment_rows::clone_and_displace(kps, 100.0, 0.0, 5.0, 30.0, rng);
  REQUIRE(kps.size() == 84 + 28);
  for (std::size_t i = 84; i < kps.size(); ++i) {
    CHECK_FALSE(kps[i].legitimate);
    CHECK(kps[i].kind == KeypointType::body);
    const auto& src = kps[static_cast<std::size_t>(*kps[i].source_id)];
    const double d = distance(src.position, kps[i].position);
    CHECK(d >= 5.0);
    CHECK(d <= 30.0);
    CHECK(src.level == kps[i].level);
  }
}

TEST_CASE("deletion and falsification") {
  auto kps = full_spine();
  Rng rng(8);
  augment_rows::delete_keypoints(kps, 0.0, 100.0, rng);
  CHECK(kps.size() == 28);
  Rng rng2(9);
  augment_rows::falsify_segments(kps, 100.0, rng2);
  const auto orig = full_spine();
  for (const auto& kp : kps) {
    const auto& src = orig[static_cast<std::size_t>(*kp.source_id)];
    CHECK(observed_segment(kp) != observed_segment(src));
    double sum = 0.0;
    for (double p : kp.segment_probs) sum += p;
    CHECK(sum == 1.0);
  }
}

TEST_CASE("perturbation is truncated at the maximum") {
  auto kps = full_spine();
  const auto orig = kps;
  Rng rng(10);
  augment_rows::perturb(kps, 100.0, 2.0, rng);
  std::size_t moved = 0;
  for (std::size_t i = 0; i < kps.size(); ++i) {
    const double d = distance(kps[i].position, orig[i].position);
    CHECK(d <= 2.0 + 1e-12);
    moved += d > 0.0;
  }
  CHECK(moved == kps.size());
}

TEST_CASE("scaling and rotation act about the centroid") {
  auto kps = full_spine();
  const Vec3 c = augment_rows::centroid(kps);
  augment_rows::rotate(kps, 0.3, -0.2, 0.5);
  const Vec3 c2 = augment_rows::centroid(kps);
  CHECK(distance(c, c2) < 1e-9);
  const auto orig = full_spine();
  // Rotation preserves pairwise distances.
  double worst = 0.0;
  for (std::size_t i = 0; i < kps.size(); ++i)
    for (std::size_t j = i + 1; j < kps.size(); ++j) {
      const double d0 = distance(orig[i].position, orig[j].position);
      worst = std::max(worst, std::abs(distance(kps[i].position, kps[j].position) - d0) / d0);
    }
  CHECK(worst < 1e-6);

  auto s = full_spine();
  augment_rows::scale_xz(s, 1.0, 0.5);
  CHECK(distance(s[0].position, s[81].position) == doctest::Approx(405.0));
}

TEST_CASE("augmentation config text round-trips and rejects bad input") {
  const auto cfg = AugmentationConfig::preset(AugmentationLevel::heavy);
  CHECK(parse_config_text(to_config_text(cfg)) == cfg);
  const auto over = parse_config_text("level = light\n# comment\nmirror_pct = 10\n");
  CHECK(over.mirror_pct == 10.0);
  CHECK(over.falsify_pct == 0.5);
  CHECK_THROWS_AS(parse_config_text("bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("mirror_pct = 150\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("mirror_pct = abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("near_clone_min_mm = 40\n"), ConfigError);
}

TEST_CASE("heavy augmentation adds keypoints on average") {
  const auto kps = full_spine();
  const auto heavy = AugmentationConfig::preset(AugmentationLevel::heavy);
  std::size_t total = 0;
  for (std::uint64_t s = 0; s < 100; ++s) total += augment(kps, heavy, s).size();
  CHECK(total > 100 * kps.size());
}
