#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spinegnn/augment.hpp"
#include "spinegnn/gnn.hpp"
#include "spinegnn/optim.hpp"

namespace spinegnn::train {

struct TrainConfig {
  int k = 14;
  gnn::LossWeights loss;
  AugmentationConfig augmentation = AugmentationConfig::preset(AugmentationLevel::default_);
  /// Graphs per optimisation step; a batch is processed as one disjoint-union graph.
  std::size_t batch_size = 25;
  std::size_t epochs = 100;
  /// Augmented graphs are regenerated from the base spines every this many epochs.
  std::size_t reaugment_every = 25;
  std::uint64_t seed = 0;
  optim::OptimizerOptions optimizer;
  /// Add the three unaugmented model spines to every epoch.
  bool include_model_spines = true;
  /// Stop after an epoch in which every training graph was predicted perfectly.
  bool stop_when_perfect = false;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double edge_loss = 0.0;
  double class_loss = 0.0;
  double legit_loss = 0.0;
  /// Level accuracy over nodes with a level target, from the epoch's forward passes.
  double node_accuracy = 0.0;
  double edge_f1 = 0.0;
  bool reaugmented = false;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t regenerations = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains `model` on augmented copies of `base_spines` (ground-truth keypoint lists).
/// Throws ConfigError for an empty dataset.
TrainResult train(gnn::GnnModel& model, optim::Optimizer& optimizer,
                  const std::vector<std::vector<Keypoint>>& base_spines, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Augmented training graphs for one regeneration round (base spines first, then model spines).
std::vector<SpineGraph> make_training_graphs(const std::vector<std::vector<Keypoint>>& base_spines,
                                             const TrainConfig& config, std::size_t round);

/// history as CSV: one header line plus one row per epoch.
std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace spinegnn::train
