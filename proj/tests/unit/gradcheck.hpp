#pragma once

// Central finite-difference gradient checks shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "spinegnn/autodiff.hpp"
#include "spinegnn/gnn.hpp"
#include "spinegnn/rng.hpp"

namespace gradcheck {

struct Result {
  double max_rel = 0.0;
  std::size_t checked = 0;
  // Coordinates skipped because a relu / max / clamp branch changes within +-h.
  std::size_t kinks = 0;
  bool ok(double tol) const { return max_rel <= tol; }
};

/// |a - n| / max(|a|, |n|, floor)
inline double rel_error(double a, double n, double floor = 1e-3) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

struct Eval {
  double value;
  std::uint64_t branches;  // Tape::branch_signature()
};

/// Perturbs each coordinate by +-h and compares the central difference of `loss` to `analytic`.
inline Result check(std::span<double* const> coords, std::span<const double> analytic,
                    const std::function<Eval()>& loss, double h = 1e-5) {
  Result r;
  const std::uint64_t b0 = loss().branches;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    double& x = *coords[i];
    const double saved = x;
    x = saved + h;
    const Eval fp = loss();
    x = saved - h;
    const Eval fm = loss();
    x = saved;
    if (fp.branches != b0 || fm.branches != b0) {
      ++r.kinks;
      continue;
    }
    const double numeric = (fp.value - fm.value) / (2.0 * h);
    r.max_rel = std::max(r.max_rel, rel_error(analytic[i], numeric));
    ++r.checked;
  }
  return r;
}

using LossFn = std::function<spinegnn::ad::Tensor(spinegnn::ad::Tape&, std::span<spinegnn::ad::Tensor>)>;

/// Gradient of `fn` with respect to every entry of every input matrix.
inline Result check_inputs(std::vector<spinegnn::Matrix> inputs, const LossFn& fn, double h = 1e-5) {
  using namespace spinegnn;
  std::vector<double> analytic;
  {
    ad::Tape tape;
    std::vector<ad::Tensor> vars;
    for (const auto& m : inputs) vars.push_back(tape.variable(m));
    auto loss = fn(tape, vars);
    tape.backward(loss);
    for (std::size_t v = 0; v < vars.size(); ++v) {
      const Matrix& g = vars[v].grad();
      for (std::size_t e = 0; e < inputs[v].size(); ++e) analytic.push_back(g.size() ? g.data[e] : 0.0);
    }
  }
  std::vector<double*> coords;
  for (auto& m : inputs)
    for (double& x : m.data) coords.push_back(&x);
  auto loss = [&] {
    ad::Tape tape(false);
    tape.set_branch_tracking(true);
    std::vector<ad::Tensor> vars;
    for (const auto& m : inputs) vars.push_back(tape.constant(m));
    const double v = fn(tape, vars).item();
    return Eval{v, tape.branch_signature()};
  };
  return check(coords, analytic, loss, h);
}

/// Gradient of the training loss with respect to model parameters. With max_coords > 0 only that
/// many randomly chosen coordinates are perturbed.
inline Result check_model(spinegnn::gnn::GnnModel& model, const spinegnn::SpineGraph& graph,
                          const spinegnn::gnn::LossWeights& w, std::size_t max_coords,
                          std::uint64_t seed, double h = 1e-5) {
  using namespace spinegnn;
  model.zero_grad();
  {
    ad::Tape tape;
    auto out = model.forward(tape, graph);
    auto terms = gnn::compute_loss(out, graph, w);
    tape.backward(terms.total);
  }
  std::vector<double*> coords;
  std::vector<double> analytic;
  for (auto* p : model.parameters())
    for (std::size_t e = 0; e < p->value.size(); ++e) {
      coords.push_back(&p->value.data[e]);
      analytic.push_back(p->grad.data[e]);
    }
  if (max_coords > 0 && coords.size() > max_coords) {
    Rng rng(seed);
    for (std::size_t i = 0; i < max_coords; ++i) {
      const std::size_t j = i + uniform_index(rng, coords.size() - i);
      std::swap(coords[i], coords[j]);
      std::swap(analytic[i], analytic[j]);
    }
    coords.resize(max_coords);
    analytic.resize(max_coords);
  }
  auto loss = [&] {
    ad::Tape tape(false);
    tape.set_branch_tracking(true);
    auto out = model.forward(tape, graph);
    const double v = gnn::compute_loss(out, graph, w).total.item();
    return Eval{v, tape.branch_signature()};
  };
  return check(coords, analytic, loss, h);
}

inline spinegnn::Matrix random_matrix(spinegnn::Rng& rng, std::size_t r, std::size_t c,
                                      double lo = -1.0, double hi = 1.0) {
  spinegnn::Matrix m(r, c);
  for (double& x : m.data) x = spinegnn::uniform(rng, lo, hi);
  return m;
}

}  // namespace gradcheck
