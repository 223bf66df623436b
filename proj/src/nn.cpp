#include "spinegnn/nn.hpp"

#include <cmath>

#include "spinegnn/error.hpp"

namespace spinegnn::nn {

Linear::Linear(std::string name, std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Matrix w(in, out);
  for (double& v : w.data) v = uniform(rng, -bound, bound);
  Matrix b(1, out);
  for (double& v : b.data) v = uniform(rng, -bound, bound);
  weight = ad::Parameter(name + ".weight", std::move(w));
  bias = ad::Parameter(name + ".bias", std::move(b));
}

ad::Tensor Linear::operator()(ad::Tape& tape, ad::Tensor x) {
  return ad::linear(x, tape.param(weight), tape.param(bias));
}

void Linear::zero_init() {
  weight.value.fill(0.0);
  bias.value.fill(0.0);
}

std::vector<ad::Parameter*> Linear::parameters() { return {&weight, &bias}; }

Mlp::Mlp(const std::string& name, const std::vector<std::size_t>& dims, Rng& rng) {
  if (dims.size() < 2) throw ConfigError("Mlp needs at least input and output dims");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    layers.emplace_back(name + "." + std::to_string(i), dims[i], dims[i + 1], rng);
  }
}

ad::Tensor Mlp::operator()(ad::Tape& tape, ad::Tensor x) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i](tape, x);
    if (i + 1 < layers.size()) x = ad::relu(x);
  }
  return x;
}

std::vector<ad::Parameter*> Mlp::parameters() {
  std::vector<ad::Parameter*> out;
  for (Linear& l : layers) {
    for (ad::Parameter* p : l.parameters()) out.push_back(p);
  }
  return out;
}

}  // namespace spinegnn::nn
