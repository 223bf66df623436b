#pragma once

// Model checkpoints: architecture, graph settings, named parameters and optimizer state as JSON.

#include <memory>
#include <string>

#include "spinegnn/gnn.hpp"
#include "spinegnn/optim.hpp"

namespace spinegnn::checkpoint {

struct Checkpoint {
  gnn::GnnConfig config;
  int k = 14;
  gnn::LossWeights loss;
  std::uint64_t seed = 0;
  std::unique_ptr<gnn::GnnModel> model;
  /// Absent when the checkpoint was written without optimizer state.
  std::unique_ptr<optim::Optimizer> optimizer;
};

std::string to_json(gnn::GnnModel& model, int k, const gnn::LossWeights& loss, std::uint64_t seed,
                    const optim::Optimizer* optimizer);
/// Rebuilds the model and copies the stored parameters in. Throws ConfigError when names or
/// shapes do not match the stored architecture, IoError for unreadable input.
Checkpoint from_json(const std::string& text);

void save(const std::string& path, gnn::GnnModel& model, int k, const gnn::LossWeights& loss,
          std::uint64_t seed, const optim::Optimizer* optimizer);
Checkpoint load(const std::string& path);

}  // namespace spinegnn::checkpoint
