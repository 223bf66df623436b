#include "spinegnn/augment.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include "spinegnn/error.hpp"

namespace spinegnn {

double standard_normal(Rng& rng) {
  double u1 = uniform(rng, 0.0, 1.0);
  while (u1 <= 0.0) u1 = uniform(rng, 0.0, 1.0);
  const double u2 = uniform(rng, 0.0, 1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string_view augmentation_level_name(AugmentationLevel l) {
  switch (l) {
    case AugmentationLevel::none: return "none";
    case AugmentationLevel::light: return "light";
    case AugmentationLevel::default_: return "default";
    case AugmentationLevel::heavy: return "heavy";
  }
  return "?";
}

AugmentationLevel parse_augmentation_level(std::string_view name) {
  for (auto l : {AugmentationLevel::none, AugmentationLevel::light, AugmentationLevel::default_,
                 AugmentationLevel::heavy}) {
    if (augmentation_level_name(l) == name) return l;
  }
  throw ConfigError("unknown augmentation level '" + std::string(name) +
                    "' (expected none, light, default or heavy)");
}

AugmentationConfig AugmentationConfig::preset(AugmentationLevel level) {
  AugmentationConfig c;
  switch (level) {
    case AugmentationLevel::none:
      break;
    case AugmentationLevel::light:
      c.falsify_pct = 0.5;
      c.delete_body_pct = 0.5;
      c.delete_pedicle_pct = 2.0;
      c.near_clone_body_pct = c.near_clone_pedicle_pct = 5.0;
      c.far_clone_body_pct = c.far_clone_pedicle_pct = 5.0;
      c.mirror_pct = 50.0;
      c.scale_pct = 5.0;
      c.rotate_pct = 5.0;
      c.perturb_pct = 20.0;
      c.perturb_max_mm = 1.0;
      break;
    case AugmentationLevel::default_:
      c.falsify_pct = 1.0;
      c.delete_body_pct = 2.0;
      c.delete_pedicle_pct = 5.0;
      c.near_clone_body_pct = c.near_clone_pedicle_pct = 10.0;
      c.far_clone_body_pct = c.far_clone_pedicle_pct = 10.0;
      c.mirror_pct = 50.0;
      c.scale_pct = 10.0;
      c.rotate_pct = 10.0;
      c.perturb_pct = 50.0;
      c.perturb_max_mm = 2.0;
      break;
    case AugmentationLevel::heavy:
      c.falsify_pct = 2.0;
      c.delete_body_pct = 7.5;
      c.delete_pedicle_pct = 15.0;
      c.near_clone_body_pct = c.near_clone_pedicle_pct = 15.0;
      c.far_clone_body_pct = c.far_clone_pedicle_pct = 15.0;
      c.mirror_pct = 50.0;
      c.scale_pct = 30.0;
      c.rotate_pct = 30.0;
      c.perturb_pct = 50.0;
      c.perturb_max_mm = 4.0;
      break;
  }
  return c;
}

namespace {

using Field = double AugmentationConfig::*;

// Key order is the serialisation order.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> f{
      {"falsify_pct", &AugmentationConfig::falsify_pct},
      {"delete_body_pct", &AugmentationConfig::delete_body_pct},
      {"delete_pedicle_pct", &AugmentationConfig::delete_pedicle_pct},
      {"near_clone_body_pct", &AugmentationConfig::near_clone_body_pct},
      {"near_clone_pedicle_pct", &AugmentationConfig::near_clone_pedicle_pct},
      {"near_clone_min_mm", &AugmentationConfig::near_clone_min_mm},
      {"near_clone_max_mm", &AugmentationConfig::near_clone_max_mm},
      {"far_clone_body_pct", &AugmentationConfig::far_clone_body_pct},
      {"far_clone_pedicle_pct", &AugmentationConfig::far_clone_pedicle_pct},
      {"far_clone_min_mm", &AugmentationConfig::far_clone_min_mm},
      {"far_clone_max_mm", &AugmentationConfig::far_clone_max_mm},
      {"mirror_pct", &AugmentationConfig::mirror_pct},
      {"scale_pct", &AugmentationConfig::scale_pct},
      {"scale_x_min", &AugmentationConfig::scale_x_min},
      {"scale_x_max", &AugmentationConfig::scale_x_max},
      {"scale_z_min", &AugmentationConfig::scale_z_min},
      {"scale_z_max", &AugmentationConfig::scale_z_max},
      {"rotate_pct", &AugmentationConfig::rotate_pct},
      {"rotate_z_max_deg", &AugmentationConfig::rotate_z_max_deg},
      {"rotate_y_max_deg", &AugmentationConfig::rotate_y_max_deg},
      {"rotate_x_max_deg", &AugmentationConfig::rotate_x_max_deg},
      {"perturb_pct", &AugmentationConfig::perturb_pct},
      {"perturb_max_mm", &AugmentationConfig::perturb_max_mm},
  };
  return f;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

void AugmentationConfig::validate() const {
  for (const auto& [key, field] : fields()) {
    const double v = this->*field;
    if (!std::isfinite(v)) throw ConfigError("augmentation '" + key + "' is not finite");
    if (key.ends_with("_pct") && (v < 0.0 || v > 100.0)) {
      throw ConfigError("augmentation '" + key + "' = " + std::to_string(v) + " outside [0, 100]");
    }
    if (!key.ends_with("_pct") && v < 0.0) {
      throw ConfigError("augmentation '" + key + "' must be non-negative");
    }
  }
  auto ordered = [](double lo, double hi, const char* what) {
    if (lo > hi) throw ConfigError(std::string("augmentation range ") + what + " is inverted");
  };
  ordered(near_clone_min_mm, near_clone_max_mm, "near_clone");
  ordered(far_clone_min_mm, far_clone_max_mm, "far_clone");
  ordered(scale_x_min, scale_x_max, "scale_x");
  ordered(scale_z_min, scale_z_max, "scale_z");
}

std::string to_config_text(const AugmentationConfig& config) {
  std::ostringstream os;
  os.precision(17);
  os << "# keypoint augmentation; probabilities in percent, distances in mm, angles in degrees\n";
  for (const auto& [key, field] : fields()) os << key << " = " << config.*field << "\n";
  return os.str();
}

AugmentationConfig parse_config_text(std::string_view text) {
  AugmentationConfig config;
  std::size_t line_no = 0;
  bool seen_key = false;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("augmentation config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key == "level") {
      if (seen_key) throw ConfigError("augmentation config: 'level' must precede other keys");
      config = AugmentationConfig::preset(parse_augmentation_level(value));
      seen_key = true;
      continue;
    }
    seen_key = true;
    const auto& f = fields();
    const auto it = std::find_if(f.begin(), f.end(), [&](const auto& p) { return p.first == key; });
    if (it == f.end()) {
      throw ConfigError("augmentation config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    try {
      std::size_t used = 0;
      config.*(it->second) = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw ConfigError("augmentation config line " + std::to_string(line_no) + ": bad number '" + value + "'");
    }
  }
  config.validate();
  return config;
}

AugmentationConfig load_augmentation_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open augmentation config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void save_augmentation_config(const AugmentationConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write augmentation config '" + path + "'");
  out << to_config_text(config);
  if (!out) throw IoError("failed writing augmentation config '" + path + "'");
}

namespace augment_rows {

namespace {

bool is_body(const Keypoint& kp) { return kp.kind == KeypointType::body; }

Vec3 random_unit_vector(Rng& rng) {
  // Marsaglia: uniform on the sphere.
  for (;;) {
    const double a = uniform(rng, -1.0, 1.0);
    const double b = uniform(rng, -1.0, 1.0);
    const double s = a * a + b * b;
    if (s >= 1.0 || s == 0.0) continue;
    const double r = 2.0 * std::sqrt(1.0 - s);
    return {a * r, b * r, 1.0 - 2.0 * s};
  }
}

constexpr double deg_to_rad(double d) { return d * std::numbers::pi / 180.0; }

}  // namespace

Vec3 centroid(const std::vector<Keypoint>& kps) {
  Vec3 c;
  for (const Keypoint& kp : kps) c += kp.position;
  return kps.empty() ? c : c / static_cast<double>(kps.size());
}

void falsify_segments(std::vector<Keypoint>& kps, double pct, Rng& rng) {
  for (Keypoint& kp : kps) {
    if (!chance_pct(rng, pct) || !is_body(kp)) continue;
    const auto current = static_cast<std::size_t>(observed_segment(kp));
    std::size_t other = uniform_index(rng, kNumSegments - 1);
    if (other >= current) ++other;
    kp.segment_probs[current] = 0.0;
    kp.segment_probs[other] = 1.0;
  }
}

void delete_keypoints(std::vector<Keypoint>& kps, double body_pct, double pedicle_pct, Rng& rng) {
  std::vector<Keypoint> kept;
  kept.reserve(kps.size());
  for (Keypoint& kp : kps) {
    if (!chance_pct(rng, is_body(kp) ? body_pct : pedicle_pct)) kept.push_back(std::move(kp));
  }
  kps = std::move(kept);
}

void clone_and_displace(std::vector<Keypoint>& kps, double body_pct, double pedicle_pct,
                        double min_mm, double max_mm, Rng& rng) {
  const std::size_t n = kps.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!chance_pct(rng, is_body(kps[i]) ? body_pct : pedicle_pct)) continue;
    const double d = uniform(rng, min_mm, max_mm);
    Keypoint clone = kps[i];
    clone.position += random_unit_vector(rng) * d;
    clone.legitimate = false;
    kps.push_back(std::move(clone));
  }
}

void mirror_x(std::vector<Keypoint>& kps) { mirror_x(kps, centroid(kps)); }

void mirror_x(std::vector<Keypoint>& kps, const Vec3& center) {
  const double cx = center.x;
  for (Keypoint& kp : kps) {
    kp.position.x = 2.0 * cx - kp.position.x;
    if (kp.kind == KeypointType::left_pedicle) {
      kp.kind = KeypointType::right_pedicle;
    } else if (kp.kind == KeypointType::right_pedicle) {
      kp.kind = KeypointType::left_pedicle;
    }
  }
}

void scale_xz(std::vector<Keypoint>& kps, double cx, double cz) { scale_xz(kps, cx, cz, centroid(kps)); }

void scale_xz(std::vector<Keypoint>& kps, double cx, double cz, const Vec3& c) {
  for (Keypoint& kp : kps) {
    kp.position.x = c.x + (kp.position.x - c.x) * cx;
    kp.position.z = c.z + (kp.position.z - c.z) * cz;
  }
}

void rotate(std::vector<Keypoint>& kps, double z_rad, double y_rad, double x_rad) {
  rotate(kps, z_rad, y_rad, x_rad, centroid(kps));
}

void rotate(std::vector<Keypoint>& kps, double z_rad, double y_rad, double x_rad, const Vec3& c) {
  const Mat3 r = Mat3::rotation_x(x_rad) * Mat3::rotation_y(y_rad) * Mat3::rotation_z(z_rad);
  for (Keypoint& kp : kps) kp.position = c + r * (kp.position - c);
}

void perturb(std::vector<Keypoint>& kps, double pct, double max_mm, Rng& rng) {
  if (max_mm <= 0.0) return;
  const double sigma = max_mm / 3.0;
  for (Keypoint& kp : kps) {
    if (!chance_pct(rng, pct)) continue;
    Vec3 v;
    do {
      v = Vec3{standard_normal(rng), standard_normal(rng), standard_normal(rng)} * sigma;
    } while (v.norm() > max_mm);
    kp.position += v;
  }
}

}  // namespace augment_rows

AugmentedScan augment_scan(const std::vector<Keypoint>& keypoints, const AugmentationConfig& config,
                           std::uint64_t rng_seed) {
  if (keypoints.empty()) throw ConfigError("augment: empty keypoint list");
  config.validate();
  namespace rows = augment_rows;
  AugmentedScan out{keypoints, keypoints};
  std::vector<Keypoint>& kps = out.keypoints;
  std::vector<Keypoint>& gt = out.ground_truth;

  Rng falsify_rng = make_rng(rng_seed, 1);
  rows::falsify_segments(kps, config.falsify_pct, falsify_rng);

  Rng delete_rng = make_rng(rng_seed, 2);
  rows::delete_keypoints(kps, config.delete_body_pct, config.delete_pedicle_pct, delete_rng);

  Rng near_rng = make_rng(rng_seed, 3);
  rows::clone_and_displace(kps, config.near_clone_body_pct, config.near_clone_pedicle_pct,
                           config.near_clone_min_mm, config.near_clone_max_mm, near_rng);

  Rng far_rng = make_rng(rng_seed, 4);
  rows::clone_and_displace(kps, config.far_clone_body_pct, config.far_clone_pedicle_pct,
                           config.far_clone_min_mm, config.far_clone_max_mm, far_rng);

  if (kps.empty()) return out;

  // Whole-graph transforms act about the detections' centroid and move the ground truth along.
  Rng mirror_rng = make_rng(rng_seed, 5);
  if (chance_pct(mirror_rng, config.mirror_pct)) {
    const Vec3 c = rows::centroid(kps);
    rows::mirror_x(kps, c);
    rows::mirror_x(gt, c);
  }

  Rng scale_rng = make_rng(rng_seed, 6);
  if (chance_pct(scale_rng, config.scale_pct)) {
    const double cx = uniform(scale_rng, config.scale_x_min, config.scale_x_max);
    const double cz = uniform(scale_rng, config.scale_z_min, config.scale_z_max);
    const Vec3 c = rows::centroid(kps);
    rows::scale_xz(kps, cx, cz, c);
    rows::scale_xz(gt, cx, cz, c);
  }

  Rng rotate_rng = make_rng(rng_seed, 7);
  if (chance_pct(rotate_rng, config.rotate_pct)) {
    const double tz = uniform(rotate_rng, -config.rotate_z_max_deg, config.rotate_z_max_deg);
    const double ty = uniform(rotate_rng, -config.rotate_y_max_deg, config.rotate_y_max_deg);
    const double tx = uniform(rotate_rng, -config.rotate_x_max_deg, config.rotate_x_max_deg);
    const Vec3 c = rows::centroid(kps);
    rows::rotate(kps, rows::deg_to_rad(tz), rows::deg_to_rad(ty), rows::deg_to_rad(tx), c);
    rows::rotate(gt, rows::deg_to_rad(tz), rows::deg_to_rad(ty), rows::deg_to_rad(tx), c);
  }

  Rng perturb_rng = make_rng(rng_seed, 8);
  rows::perturb(kps, config.perturb_pct, config.perturb_max_mm, perturb_rng);
  return out;
}

std::vector<Keypoint> augment(const std::vector<Keypoint>& keypoints,
                              const AugmentationConfig& config, std::uint64_t rng_seed) {
  return augment_scan(keypoints, config, rng_seed).keypoints;
}

}  // namespace spinegnn
