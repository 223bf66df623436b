#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "spinegnn/autodiff.hpp"

namespace spinegnn::optim {

enum class Kind { madgrad, adam };

struct OptimizerOptions {
  Kind kind = Kind::madgrad;
  double lr = 1e-3;
  /// MADGRAD: momentum beta, the iterate is averaged with weight c = 1 - beta.
  /// Adam: beta1.
  double momentum = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;
};

/// Per-parameter optimizer state, addressable by parameter name for checkpointing.
struct SlotState {
  std::string name;
  std::vector<Matrix> slots;
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  /// Applies one update to every parameter from its current grad.
  virtual void step(std::span<ad::Parameter* const> params) = 0;
  virtual std::int64_t steps() const = 0;
  virtual const OptimizerOptions& options() const = 0;
  virtual std::vector<SlotState> state() const = 0;
  virtual void restore(std::int64_t steps, std::vector<SlotState> state) = 0;
};

/// MADGRAD dual-averaging update:
///   lambda_k = lr * sqrt(k + 1)
///   s += lambda_k g,  nu += lambda_k g*g
///   z = x0 - s / (cbrt(nu) + eps)
///   x = (1 - c) x + c z,  c = 1 - momentum
/// x0 is captured the first time a parameter is stepped.
class Madgrad final : public Optimizer {
 public:
  explicit Madgrad(OptimizerOptions opts);
  void step(std::span<ad::Parameter* const> params) override;
  std::int64_t steps() const override { return steps_; }
  const OptimizerOptions& options() const override { return opts_; }
  std::vector<SlotState> state() const override;
  void restore(std::int64_t steps, std::vector<SlotState> state) override;

 private:
  struct Slot {
    Matrix x0, grad_sum, grad_sq_sum;
  };
  OptimizerOptions opts_;
  std::int64_t steps_ = 0;
  std::vector<std::string> names_;
  std::vector<Slot> slots_;
};

class Adam final : public Optimizer {
 public:
  explicit Adam(OptimizerOptions opts);
  void step(std::span<ad::Parameter* const> params) override;
  std::int64_t steps() const override { return steps_; }
  const OptimizerOptions& options() const override { return opts_; }
  std::vector<SlotState> state() const override;
  void restore(std::int64_t steps, std::vector<SlotState> state) override;

 private:
  struct Slot {
    Matrix m, v;
  };
  OptimizerOptions opts_;
  std::int64_t steps_ = 0;
  std::vector<std::string> names_;
  std::vector<Slot> slots_;
};

std::unique_ptr<Optimizer> make_optimizer(const OptimizerOptions& opts);

std::string kind_name(Kind k);
Kind parse_kind(const std::string& s);

}  // namespace spinegnn::optim
