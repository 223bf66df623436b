#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spinegnn/autodiff.hpp"
#include "spinegnn/rng.hpp"

namespace spinegnn::nn {

/// y = x W + b with W of shape (in x out) and b of shape (1 x out).
struct Linear {
  ad::Parameter weight;
  ad::Parameter bias;

  Linear() = default;
  /// Uniform fan-in initialisation: W, b ~ U(-1/sqrt(in), 1/sqrt(in)).
  Linear(std::string name, std::size_t in, std::size_t out, Rng& rng);

  std::size_t in_dim() const { return weight.value.rows; }
  std::size_t out_dim() const { return weight.value.cols; }

  ad::Tensor operator()(ad::Tape& tape, ad::Tensor x);
  void zero_init();
  std::vector<ad::Parameter*> parameters();
};

/// Multi-layer perceptron: ReLU between affine layers, identity after the last one.
struct Mlp {
  std::vector<Linear> layers;

  Mlp() = default;
  /// dims = {in, hidden..., out}; needs at least two entries.
  Mlp(const std::string& name, const std::vector<std::size_t>& dims, Rng& rng);

  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }

  ad::Tensor operator()(ad::Tape& tape, ad::Tensor x);
  std::vector<ad::Parameter*> parameters();
};

}  // namespace spinegnn::nn
