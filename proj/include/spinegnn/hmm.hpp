#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "spinegnn/matrix.hpp"
#include "spinegnn/spine.hpp"

namespace spinegnn::baselines {

/// Discrete first-order HMM. pi has one entry per state; a is states x states; b is
/// states x symbols. Every row is a probability distribution.
struct Hmm {
  std::vector<double> pi;
  Matrix a;
  Matrix b;

  std::size_t num_states() const { return pi.size(); }
  std::size_t num_symbols() const { return b.cols; }
  /// Throws ConfigError on shape mismatch, negative entries or rows not summing to 1 +- tol.
  void validate(double tol = 1e-9) const;

  bool operator==(const Hmm&) const = default;
};

/// log P(obs | model) via the scaled forward pass. Empty sequences give 0.
double log_likelihood(const Hmm& model, std::span<const int> obs);

/// Sum of log_likelihood over all sequences.
double total_log_likelihood(const Hmm& model, const std::vector<std::vector<int>>& sequences);

/// log P(states, obs | model); -inf for impossible paths.
double path_log_prob(const Hmm& model, std::span<const int> states, std::span<const int> obs);

struct BaumWelchOptions {
  int max_iters = 100;
  double tol = 1e-6;
  /// Added to every re-estimated count the initial model gives non-zero probability, before
  /// renormalising. Zeros of the initial model stay zero, as in plain EM.
  double smoothing = 1e-6;
};

struct BaumWelchResult {
  Hmm model;
  /// Log-likelihood of the training set before each iteration and after the last one.
  std::vector<double> log_likelihoods;
  int iterations = 0;
};

/// EM re-estimation with scaled forward-backward. Stops after max_iters iterations or as soon as
/// an iteration gains less than tol. Empty sequences are ignored; throws ConfigError when none
/// remain.
BaumWelchResult baum_welch(const std::vector<std::vector<int>>& sequences, const Hmm& init,
                           const BaumWelchOptions& options = {});

/// Viterbi MAP state path (log space, lowest state wins ties). Empty input gives empty output.
std::vector<int> viterbi(const Hmm& model, std::span<const int> obs);

/// 28-level, 4-segment starting model: uniform pi, each level moves on by one (0.8), skips one
/// (0.1) or stays (0.1), renormalised at the caudal end; emissions put `own_segment` on the
/// level's segment and share the rest.
Hmm default_level_hmm(double own_segment = 0.97);

/// Indices of the legitimate bodies in `keypoints` ordered head to tail: sorted by projection onto
/// the first principal axis of their positions, oriented to run along -z. With
/// `require_legitimate` false all bodies are used.
std::vector<int> ordered_bodies(const std::vector<Keypoint>& keypoints, bool require_legitimate = true);

/// Observed segment labels of the given keypoints.
std::vector<int> segment_sequence(const std::vector<Keypoint>& keypoints, std::span<const int> indices);

/// Decodes the body sequence; returns (keypoint index, level) for every decoded body.
std::vector<std::pair<int, SpineLevel>> hmm_decode_levels(const Hmm& model, const std::vector<Keypoint>& keypoints,
                                                          bool require_legitimate = true);

std::string hmm_to_json(const Hmm& model);
Hmm hmm_from_json(const std::string& text);
void save_hmm(const Hmm& model, const std::string& path);
Hmm load_hmm(const std::string& path);

}  // namespace spinegnn::baselines
