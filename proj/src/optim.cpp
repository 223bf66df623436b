#include "spinegnn/optim.hpp"

#include <cmath>

#include "spinegnn/error.hpp"

namespace spinegnn::optim {

namespace {

void check_layout(const std::vector<std::string>& names, std::span<ad::Parameter* const> params) {
  if (names.size() != params.size()) {
    throw ConfigError("optimizer was initialised with " + std::to_string(names.size()) +
                      " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] != params[i]->name) {
      throw ConfigError("optimizer parameter order changed: expected '" + names[i] + "', got '" +
                        params[i]->name + "'");
    }
  }
}

}  // namespace

Madgrad::Madgrad(OptimizerOptions opts) : opts_(opts) {}

void Madgrad::step(std::span<ad::Parameter* const> params) {
  if (slots_.empty() && names_.empty()) {
    for (ad::Parameter* p : params) {
      names_.push_back(p->name);
      const Matrix zeros(p->value.rows, p->value.cols);
      slots_.push_back({p->value, zeros, zeros});
    }
  }
  check_layout(names_, params);
  const double lambda = opts_.lr * std::sqrt(static_cast<double>(steps_) + 1.0);
  const double c = 1.0 - opts_.momentum;
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Parameter& p = *params[i];
    Slot& s = slots_[i];
    for (std::size_t k = 0; k < p.value.data.size(); ++k) {
      const double g = p.grad.data.empty() ? 0.0 : p.grad.data[k];
      s.grad_sum.data[k] += lambda * g;
      s.grad_sq_sum.data[k] += lambda * g * g;
      const double z = s.x0.data[k] - s.grad_sum.data[k] / (std::cbrt(s.grad_sq_sum.data[k]) + opts_.eps);
      double& x = p.value.data[k];
      x = c == 1.0 ? z : (1.0 - c) * x + c * z;
    }
  }
  ++steps_;
}

std::vector<SlotState> Madgrad::state() const {
  std::vector<SlotState> out;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    out.push_back({names_[i], {slots_[i].x0, slots_[i].grad_sum, slots_[i].grad_sq_sum}});
  }
  return out;
}

void Madgrad::restore(std::int64_t steps, std::vector<SlotState> state) {
  steps_ = steps;
  names_.clear();
  slots_.clear();
  for (SlotState& s : state) {
    if (s.slots.size() != 3) throw ConfigError("madgrad state for '" + s.name + "' needs 3 slots");
    names_.push_back(s.name);
    slots_.push_back({std::move(s.slots[0]), std::move(s.slots[1]), std::move(s.slots[2])});
  }
}

Adam::Adam(OptimizerOptions opts) : opts_(opts) {}

void Adam::step(std::span<ad::Parameter* const> params) {
  if (slots_.empty() && names_.empty()) {
    for (ad::Parameter* p : params) {
      names_.push_back(p->name);
      const Matrix zeros(p->value.rows, p->value.cols);
      slots_.push_back({zeros, zeros});
    }
  }
  check_layout(names_, params);
  ++steps_;
  const double b1 = opts_.momentum;
  const double b2 = opts_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Parameter& p = *params[i];
    Slot& s = slots_[i];
    for (std::size_t k = 0; k < p.value.data.size(); ++k) {
      const double g = p.grad.data.empty() ? 0.0 : p.grad.data[k];
      s.m.data[k] = b1 * s.m.data[k] + (1.0 - b1) * g;
      s.v.data[k] = b2 * s.v.data[k] + (1.0 - b2) * g * g;
      p.value.data[k] -= opts_.lr * (s.m.data[k] / bc1) / (std::sqrt(s.v.data[k] / bc2) + opts_.eps);
    }
  }
}

std::vector<SlotState> Adam::state() const {
  std::vector<SlotState> out;
  for (std::size_t i = 0; i < slots_.size(); ++i) out.push_back({names_[i], {slots_[i].m, slots_[i].v}});
  return out;
}

void Adam::restore(std::int64_t steps, std::vector<SlotState> state) {
  steps_ = steps;
  names_.clear();
  slots_.clear();
  for (SlotState& s : state) {
    if (s.slots.size() != 2) throw ConfigError("adam state for '" + s.name + "' needs 2 slots");
    names_.push_back(s.name);
    slots_.push_back({std::move(s.slots[0]), std::move(s.slots[1])});
  }
}

std::unique_ptr<Optimizer> make_optimizer(const OptimizerOptions& opts) {
  if (opts.kind == Kind::adam) return std::make_unique<Adam>(opts);
  return std::make_unique<Madgrad>(opts);
}

std::string kind_name(Kind k) { return k == Kind::adam ? "adam" : "madgrad"; }

Kind parse_kind(const std::string& s) {
  if (s == "madgrad") return Kind::madgrad;
  if (s == "adam") return Kind::adam;
  throw ConfigError("unknown optimizer '" + s + "' (expected madgrad or adam)");
}

}  // namespace spinegnn::optim
