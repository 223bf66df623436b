#pragma once

// Reverse-mode automatic differentiation over dense matrices.
//
// A Tape records every operation applied to its Tensors. Calling Tape::backward on a 1x1 loss
// walks the record in reverse and fills in gradients; gradients of Parameters used on the tape
// are accumulated into Parameter::grad. A tape is single-use and single-threaded.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "spinegnn/matrix.hpp"

namespace spinegnn::ad {

/// A named trainable array living outside any tape.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(value.rows, value.cols) {}

  void zero_grad() { grad = Matrix(value.rows, value.cols); }
};

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Matrix& value() const;
  /// Gradient after Tape::backward; zero-sized when the tensor does not depend on a parameter.
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
  /// Value of a 1x1 tensor.
  double item() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  /// With record_gradients = false parameters enter as constants and nothing is recorded for
  /// back-propagation (inference).
  explicit Tape(bool record_gradients = true) : record_gradients_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Tensor constant(Matrix value);
  /// Leaf that receives a gradient but is not tied to a Parameter (used by gradient checks).
  Tensor variable(Matrix value);
  /// Leaf bound to a parameter. Repeated calls with the same parameter return the same tensor, so
  /// weight-shared layers accumulate into one gradient.
  Tensor param(Parameter& p);

  /// Records a derived value. `backward` reads grad(self) and adds into the parents' grads; it is
  /// only invoked when some parent requires a gradient.
  Tensor record(Matrix value, std::span<const Tensor> parents, BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and back-propagates. Throws ShapeError unless loss is 1x1.
  void backward(Tensor loss);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  Matrix& grad(std::size_t id) { return nodes_[id].grad; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// When on, relu, max pooling and logit clamping fold their branch decisions (signs, arg-max
  /// rows, clamped entries) into branch_signature(). Two evaluations with equal signatures lie on
  /// the same smooth piece of the function.
  void set_branch_tracking(bool on) { track_branches_ = on; }
  bool tracks_branches() const { return track_branches_; }
  void note_branch(std::uint64_t v) { branch_hash_ = (branch_hash_ ^ v) * 0x100000001b3ULL + 0x9e3779b97f4a7c15ULL; }
  std::uint64_t branch_signature() const { return branch_hash_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  bool record_gradients_ = true;
  bool track_branches_ = false;
  std::uint64_t branch_hash_ = 0;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

// Differentiable operations. Shape mismatches throw ShapeError naming both shapes.

Tensor matmul(Tensor a, Tensor b);
/// x W + b with b (1 x cols) broadcast over rows; one pass instead of matmul + add_bias.
Tensor linear(Tensor x, Tensor weight, Tensor bias);
Tensor add(Tensor a, Tensor b);
Tensor sub(Tensor a, Tensor b);
/// x (n x c) + bias (1 x c) broadcast over rows.
Tensor add_bias(Tensor x, Tensor bias);
Tensor scale(Tensor x, double factor);
Tensor relu(Tensor x);
Tensor sigmoid(Tensor x);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(Tensor x, std::size_t begin, std::size_t end);
Tensor slice_rows(Tensor x, std::size_t begin, std::size_t end);
using RowIndex = std::shared_ptr<const std::vector<int>>;

/// out[r] = x[index[r]], or a zero row where index[r] < 0.
Tensor gather_rows(Tensor x, RowIndex index);
Tensor gather_rows(Tensor x, std::vector<int> index);

struct GatherTerm {
  Tensor source;
  /// Null selects rows one-to-one (source must then have the output's row count).
  RowIndex index;
};
/// out[r] = bias + sum_t terms[t].source[terms[t].index[r]] (negative indices contribute zero).
Tensor gather_sum(std::span<const GatherTerm> terms, Tensor bias, std::size_t rows);
/// out[g] = element-wise max over rows r with group[r] == g. Every group must be non-empty.
/// The gradient flows to the arg-max row only; ties go to the lowest row index.
Tensor row_max_pool_grouped(Tensor x, RowIndex group, std::size_t num_groups);
/// Sum of all entries, 1x1.
Tensor sum(Tensor x);

/// Mean binary cross-entropy over entries with mask != 0 (all entries when mask is empty),
/// computed in logit space. Logits are clamped to [-30, 30]. All-masked input yields 0.
Tensor bce_with_logits(Tensor logits, std::span<const double> targets,
                       std::span<const std::uint8_t> mask = {});
/// Mean softmax cross-entropy over rows with mask != 0 (all rows when mask is empty).
/// targets[r] is the class index of row r; it is ignored for masked rows.
Tensor softmax_cross_entropy(Tensor logits, std::span<const int> targets,
                             std::span<const std::uint8_t> mask = {});

inline constexpr double kLogitClamp = 30.0;

}  // namespace spinegnn::ad
