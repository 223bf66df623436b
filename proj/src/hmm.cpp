#include "spinegnn/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "spinegnn/error.hpp"

namespace spinegnn::baselines {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_row(std::span<const double> row, double tol, const char* what) {
  double s = 0.0;
  for (double x : row) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError(std::string("hmm: negative or non-finite entry in ") + what);
    s += x;
  }
  if (std::abs(s - 1.0) > tol) throw ConfigError(std::string("hmm: row of ") + what + " does not sum to 1");
}

void check_obs(const Hmm& m, std::span<const int> obs) {
  for (int o : obs) {
    if (o < 0 || static_cast<std::size_t>(o) >= m.num_symbols()) {
      throw ConfigError("hmm: observation " + std::to_string(o) + " out of range");
    }
  }
}

// Scaled forward pass. alpha is T x N with rows normalised; c[t] is the normaliser.
struct Forward {
  Matrix alpha;
  std::vector<double> c;
};

Forward forward(const Hmm& m, std::span<const int> obs) {
  const std::size_t n = m.num_states();
  const std::size_t t_len = obs.size();
  Forward f{Matrix(t_len, n), std::vector<double>(t_len, 0.0)};
  for (std::size_t t = 0; t < t_len; ++t) {
    const auto o = static_cast<std::size_t>(obs[t]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double v;
      if (t == 0) {
        v = m.pi[j];
      } else {
        v = 0.0;
        for (std::size_t i = 0; i < n; ++i) v += f.alpha(t - 1, i) * m.a(i, j);
      }
      v *= m.b(j, o);
      f.alpha(t, j) = v;
      s += v;
    }
    f.c[t] = s;
    if (s > 0.0) {
      for (std::size_t j = 0; j < n; ++j) f.alpha(t, j) /= s;
    }
  }
  return f;
}

double log_from_scales(const std::vector<double>& c) {
  double ll = 0.0;
  for (double s : c) {
    if (s <= 0.0) return kNegInf;
    ll += std::log(s);
  }
  return ll;
}

void normalise_rows(Matrix& num, const Matrix& fallback) {
  for (std::size_t i = 0; i < num.rows; ++i) {
    auto row = num.row(i);
    const double s = std::accumulate(row.begin(), row.end(), 0.0);
    if (s > 0.0) {
      for (double& x : row) x /= s;
    } else {
      std::copy(fallback.row(i).begin(), fallback.row(i).end(), row.begin());
    }
  }
}

}  // namespace

void Hmm::validate(double tol) const {
  const std::size_t n = pi.size();
  if (n == 0) throw ConfigError("hmm: no states");
  if (a.rows != n || a.cols != n) throw ConfigError("hmm: transition matrix must be " + std::to_string(n) + "x" + std::to_string(n));
  if (b.rows != n || b.cols == 0) throw ConfigError("hmm: emission matrix must have " + std::to_string(n) + " rows");
  check_row(pi, tol, "pi");
  for (std::size_t i = 0; i < n; ++i) {
    check_row(a.row(i), tol, "A");
    check_row(b.row(i), tol, "B");
  }
}

double log_likelihood(const Hmm& model, std::span<const int> obs) {
  if (obs.empty()) return 0.0;
  check_obs(model, obs);
  return log_from_scales(forward(model, obs).c);
}

double total_log_likelihood(const Hmm& model, const std::vector<std::vector<int>>& sequences) {
  double ll = 0.0;
  for (const auto& s : sequences) ll += log_likelihood(model, s);
  return ll;
}

double path_log_prob(const Hmm& model, std::span<const int> states, std::span<const int> obs) {
  if (states.size() != obs.size()) throw ConfigError("hmm: path and observation lengths differ");
  check_obs(model, obs);
  double lp = 0.0;
  for (std::size_t t = 0; t < obs.size(); ++t) {
    const auto s = static_cast<std::size_t>(states[t]);
    if (s >= model.num_states()) throw ConfigError("hmm: state out of range");
    const double p = (t == 0 ? model.pi[s] : model.a(static_cast<std::size_t>(states[t - 1]), s)) *
                     model.b(s, static_cast<std::size_t>(obs[t]));
    if (p <= 0.0) return kNegInf;
    lp += std::log(p);
  }
  return lp;
}

BaumWelchResult baum_welch(const std::vector<std::vector<int>>& sequences, const Hmm& init,
                           const BaumWelchOptions& options) {
  init.validate();
  std::vector<const std::vector<int>*> data;
  for (const auto& s : sequences) {
    if (s.empty()) continue;
    check_obs(init, s);
    data.push_back(&s);
  }
  if (data.empty()) throw ConfigError("baum_welch: empty training set");

  const std::size_t n = init.num_states();
  const std::size_t m = init.num_symbols();
  BaumWelchResult res{init, {}, 0};
  Hmm& cur = res.model;

  for (int iter = 0;; ++iter) {
    std::vector<double> pi_num(n, 0.0);
    Matrix a_num(n, n), b_num(n, m);
    double ll = 0.0;
    for (const auto* seq : data) {
      const auto& obs = *seq;
      const std::size_t t_len = obs.size();
      const Forward f = forward(cur, obs);
      ll += log_from_scales(f.c);
      if (std::any_of(f.c.begin(), f.c.end(), [](double s) { return s <= 0.0; })) continue;
      // Scaled backward pass sharing the forward normalisers.
      Matrix beta(t_len, n, 1.0);
      for (std::size_t t = t_len - 1; t-- > 0;) {
        const auto o = static_cast<std::size_t>(obs[t + 1]);
        for (std::size_t i = 0; i < n; ++i) {
          double v = 0.0;
          for (std::size_t j = 0; j < n; ++j) v += cur.a(i, j) * cur.b(j, o) * beta(t + 1, j);
          beta(t, i) = v / f.c[t + 1];
        }
      }
      for (std::size_t t = 0; t < t_len; ++t) {
        const auto o = static_cast<std::size_t>(obs[t]);
        for (std::size_t i = 0; i < n; ++i) {
          const double g = f.alpha(t, i) * beta(t, i);
          if (t == 0) pi_num[i] += g;
          b_num(i, o) += g;
        }
        if (t + 1 < t_len) {
          const auto o1 = static_cast<std::size_t>(obs[t + 1]);
          for (std::size_t i = 0; i < n; ++i) {
            const double ai = f.alpha(t, i) / f.c[t + 1];
            if (ai == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
              a_num(i, j) += ai * cur.a(i, j) * cur.b(j, o1) * beta(t + 1, j);
            }
          }
        }
      }
    }
    res.log_likelihoods.push_back(ll);
    const std::size_t k = res.log_likelihoods.size();
    if (k >= 2 && res.log_likelihoods[k - 1] - res.log_likelihoods[k - 2] < options.tol) break;
    if (iter >= options.max_iters) break;

    // Pseudo-counts only where the starting model allows mass, so structural zeros survive.
    for (std::size_t i = 0; i < n; ++i) {
      if (init.pi[i] > 0.0) pi_num[i] += options.smoothing;
    }
    for (std::size_t i = 0; i < a_num.size(); ++i) {
      if (init.a.data[i] > 0.0) a_num.data[i] += options.smoothing;
    }
    for (std::size_t i = 0; i < b_num.size(); ++i) {
      if (init.b.data[i] > 0.0) b_num.data[i] += options.smoothing;
    }
    const double pi_sum = std::accumulate(pi_num.begin(), pi_num.end(), 0.0);
    if (pi_sum > 0.0) {
      for (std::size_t i = 0; i < n; ++i) cur.pi[i] = pi_num[i] / pi_sum;
    }
    normalise_rows(a_num, cur.a);
    normalise_rows(b_num, cur.b);
    cur.a = std::move(a_num);
    cur.b = std::move(b_num);
    res.iterations = iter + 1;
  }
  return res;
}

std::vector<int> viterbi(const Hmm& model, std::span<const int> obs) {
  if (obs.empty()) return {};
  check_obs(model, obs);
  const std::size_t n = model.num_states();
  const std::size_t t_len = obs.size();
  auto lg = [](double p) { return p > 0.0 ? std::log(p) : kNegInf; };
  Matrix la(n, n);
  for (std::size_t i = 0; i < n * n; ++i) la.data[i] = lg(model.a.data[i]);
  std::vector<double> delta(n), next(n);
  std::vector<std::vector<int>> back(t_len, std::vector<int>(n, 0));
  for (std::size_t j = 0; j < n; ++j) delta[j] = lg(model.pi[j]) + lg(model.b(j, static_cast<std::size_t>(obs[0])));
  for (std::size_t t = 1; t < t_len; ++t) {
    const auto o = static_cast<std::size_t>(obs[t]);
    for (std::size_t j = 0; j < n; ++j) {
      double best = kNegInf;
      int arg = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = delta[i] + la(i, j);
        if (v > best) {
          best = v;
          arg = static_cast<int>(i);
        }
      }
      next[j] = best + lg(model.b(j, o));
      back[t][j] = arg;
    }
    std::swap(delta, next);
  }
  std::vector<int> path(t_len);
  path[t_len - 1] = static_cast<int>(std::max_element(delta.begin(), delta.end()) - delta.begin());
  for (std::size_t t = t_len - 1; t > 0; --t) path[t - 1] = back[t][static_cast<std::size_t>(path[t])];
  return path;
}

Hmm default_level_hmm(double own_segment) {
  const auto n = static_cast<std::size_t>(kNumLevels);
  const auto m = static_cast<std::size_t>(kNumSegments);
  Hmm h{std::vector<double>(n, 1.0 / static_cast<double>(n)), Matrix(n, n), Matrix(n, m)};
  for (std::size_t i = 0; i < n; ++i) {
    h.a(i, i) = 0.1;
    if (i + 1 < n) h.a(i, i + 1) = 0.8;
    if (i + 2 < n) h.a(i, i + 2) = 0.1;
    double s = 0.0;
    for (double x : h.a.row(i)) s += x;
    for (double& x : h.a.row(i)) x /= s;
    const auto seg = static_cast<std::size_t>(level_to_segment(SpineLevel(static_cast<int>(i))));
    for (std::size_t k = 0; k < m; ++k) {
      h.b(i, k) = k == seg ? own_segment : (1.0 - own_segment) / static_cast<double>(m - 1);
    }
  }
  return h;
}

std::vector<int> ordered_bodies(const std::vector<Keypoint>& keypoints, bool require_legitimate) {
  std::vector<int> idx;
  for (std::size_t i = 0; i < keypoints.size(); ++i) {
    const auto& kp = keypoints[i];
    if (kp.kind != KeypointType::body) continue;
    if (require_legitimate && !kp.legitimate) continue;
    idx.push_back(static_cast<int>(i));
  }
  if (idx.size() < 2) return idx;
  Vec3 mean{};
  for (int i : idx) mean = mean + keypoints[static_cast<std::size_t>(i)].position;
  mean = mean * (1.0 / static_cast<double>(idx.size()));
  double cov[3][3] = {};
  for (int i : idx) {
    const Vec3 d = keypoints[static_cast<std::size_t>(i)].position - mean;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) cov[r][c] += d[r] * d[c];
  }
  // Power iteration from the nominal spine direction.
  Vec3 v{0.0, 0.0, -1.0};
  for (int it = 0; it < 500; ++it) {
    Vec3 w{};
    for (int r = 0; r < 3; ++r) w[r] = cov[r][0] * v[0] + cov[r][1] * v[1] + cov[r][2] * v[2];
    const double nw = w.norm();
    if (nw == 0.0) break;
    w = w * (1.0 / nw);
    const bool done = (w - v).norm() < 1e-13;
    v = w;
    if (done) break;
  }
  if (v[2] > 0.0) v = v * -1.0;
  std::vector<std::pair<double, int>> keyed;
  for (int i : idx) keyed.emplace_back((keypoints[static_cast<std::size_t>(i)].position - mean).dot(v), i);
  std::sort(keyed.begin(), keyed.end());
  for (std::size_t i = 0; i < keyed.size(); ++i) idx[i] = keyed[i].second;
  return idx;
}

std::vector<int> segment_sequence(const std::vector<Keypoint>& keypoints, std::span<const int> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(static_cast<int>(observed_segment(keypoints.at(static_cast<std::size_t>(i)))));
  return out;
}

std::vector<std::pair<int, SpineLevel>> hmm_decode_levels(const Hmm& model, const std::vector<Keypoint>& keypoints,
                                                          bool require_legitimate) {
  const auto order = ordered_bodies(keypoints, require_legitimate);
  const auto obs = segment_sequence(keypoints, order);
  const auto path = viterbi(model, obs);
  std::vector<std::pair<int, SpineLevel>> out;
  for (std::size_t t = 0; t < order.size(); ++t) out.emplace_back(order[t], SpineLevel(path[t]));
  return out;
}

std::string hmm_to_json(const Hmm& model) {
  nlohmann::ordered_json j;
  j["states"] = model.num_states();
  j["symbols"] = model.num_symbols();
  j["pi"] = model.pi;
  auto rows = [](const Matrix& mat) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (std::size_t r = 0; r < mat.rows; ++r) arr.push_back(std::vector<double>(mat.row(r).begin(), mat.row(r).end()));
    return arr;
  };
  j["A"] = rows(model.a);
  j["B"] = rows(model.b);
  return j.dump(2);
}

Hmm hmm_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("hmm: invalid JSON: ") + e.what());
  }
  auto rows = [](const nlohmann::json& arr, const char* what) {
    if (!arr.is_array() || arr.empty()) throw ConfigError(std::string("hmm: missing ") + what);
    const std::size_t cols = arr[0].size();
    Matrix mat(arr.size(), cols);
    for (std::size_t r = 0; r < arr.size(); ++r) {
      if (!arr[r].is_array() || arr[r].size() != cols) throw ConfigError(std::string("hmm: ragged ") + what);
      for (std::size_t c = 0; c < cols; ++c) mat(r, c) = arr[r][c].get<double>();
    }
    return mat;
  };
  Hmm h;
  try {
    if (!j.contains("pi")) throw ConfigError("hmm: missing pi");
    h.pi = j.at("pi").get<std::vector<double>>();
    h.a = rows(j.value("A", nlohmann::json()), "A");
    h.b = rows(j.value("B", nlohmann::json()), "B");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("hmm: malformed model: ") + e.what());
  }
  h.validate(1e-6);
  return h;
}

void save_hmm(const Hmm& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << hmm_to_json(model) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

Hmm load_hmm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return hmm_from_json(ss.str());
}

}  // namespace spinegnn::baselines
