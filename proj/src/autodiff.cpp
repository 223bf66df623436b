#include "spinegnn/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "spinegnn/error.hpp"
#include "spinegnn/kernels.hpp"

namespace spinegnn::ad {

const Matrix& Tensor::value() const { return tape_->value(id_); }
const Matrix& Tensor::grad() const { return tape_->grad(id_); }

double Tensor::item() const {
  const Matrix& v = value();
  if (v.rows != 1 || v.cols != 1) throw ShapeError("item() on non-scalar " + v.shape_string());
  return v.data[0];
}

Tensor Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return {this, nodes_.size() - 1};
}

Tensor Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, true});
  return {this, nodes_.size() - 1};
}

Tensor Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
  if (record_gradients_) {
    nodes_.push_back(Node{p.value, {}, {}, &p, true});
  } else {
    nodes_.push_back(Node{p.value, {}, {}, nullptr, false});
  }
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

Tensor Tape::record(Matrix value, std::span<const Tensor> parents, BackwardFn backward) {
  bool needs = false;
  for (const Tensor& t : parents) {
    if (&t.tape() != this) throw Error("tensor used on a foreign tape");
    needs = needs || nodes_[t.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : BackwardFn{}, nullptr,
                        needs});
  return {this, nodes_.size() - 1};
}

void Tape::backward(Tensor loss) {
  const Matrix& lv = value(loss.id());
  if (lv.rows != 1 || lv.cols != 1) {
    throw ShapeError("backward() needs a scalar loss, got " + lv.shape_string());
  }
  for (Node& n : nodes_) {
    if (n.requires_grad) n.grad = Matrix(n.value.rows, n.value.cols);
  }
  if (!nodes_[loss.id()].requires_grad) return;
  nodes_[loss.id()].grad.data[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward) n.backward(*this, i);
    if (n.param != nullptr) {
      Matrix& pg = n.param->grad;
      if (pg.rows != n.value.rows || pg.cols != n.value.cols) pg = Matrix(n.value.rows, n.value.cols);
      for (std::size_t k = 0; k < pg.data.size(); ++k) pg.data[k] += n.grad.data[k];
    }
  }
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

void accumulate(Matrix& dst, const Matrix& src) {
  for (std::size_t k = 0; k < dst.data.size(); ++k) dst.data[k] += src.data[k];
}

}  // namespace

Tensor matmul(Tensor a, Tensor b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols != bv.rows) {
    throw ShapeError("matmul: shape mismatch " + av.shape_string() + " vs " + bv.shape_string());
  }
  Matrix out(av.rows, bv.cols);
  kernels::active().gemm(av.data.data(), bv.data.data(), out.data.data(), av.rows, av.cols,
                         bv.cols, false);
  const Tensor parents[] = {a, b};
  return a.tape().record(std::move(out), parents, [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& av = t.value(a.id());
    const Matrix& bv = t.value(b.id());
    const auto& k = kernels::active();
    if (t.requires_grad(a.id())) {
      const Matrix bt = bv.transposed();
      k.gemm(g.data.data(), bt.data.data(), t.grad(a.id()).data.data(), g.rows, g.cols, bt.cols,
             true);
    }
    if (t.requires_grad(b.id())) {
      k.gemm_tn(av.data.data(), g.data.data(), t.grad(b.id()).data.data(), av.rows, av.cols,
                g.cols);
    }
  });
}

Tensor linear(Tensor x, Tensor weight, Tensor bias) {
  const Matrix& xv = x.value();
  const Matrix& wv = weight.value();
  const Matrix& bv = bias.value();
  if (xv.cols != wv.rows) {
    throw ShapeError("linear: shape mismatch " + xv.shape_string() + " vs " + wv.shape_string());
  }
  if (bv.rows != 1 || bv.cols != wv.cols) {
    throw ShapeError("linear: bias shape mismatch " + wv.shape_string() + " vs " + bv.shape_string());
  }
  Matrix out(xv.rows, wv.cols);
  for (std::size_t r = 0; r < out.rows; ++r) {
    std::copy(bv.data.begin(), bv.data.end(), out.row(r).begin());
  }
  kernels::active().gemm(xv.data.data(), wv.data.data(), out.data.data(), xv.rows, xv.cols,
                         wv.cols, true);
  const Tensor parents[] = {x, weight, bias};
  return x.tape().record(std::move(out), parents, [x, weight, bias](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const auto& k = kernels::active();
    if (t.requires_grad(x.id())) {
      const Matrix wt = t.value(weight.id()).transposed();
      k.gemm(g.data.data(), wt.data.data(), t.grad(x.id()).data.data(), g.rows, g.cols, wt.cols,
             true);
    }
    if (t.requires_grad(weight.id())) {
      const Matrix& xv = t.value(x.id());
      k.gemm_tn(xv.data.data(), g.data.data(), t.grad(weight.id()).data.data(), xv.rows, xv.cols,
                g.cols);
    }
    if (t.requires_grad(bias.id())) {
      Matrix& gb = t.grad(bias.id());
      for (std::size_t r = 0; r < g.rows; ++r) k.axpy(1.0, g.row(r).data(), gb.data.data(), g.cols);
    }
  });
}

Tensor add(Tensor a, Tensor b) {
  require_same_shape(a.value(), b.value(), "add");
  Matrix out = a.value();
  accumulate(out, b.value());
  const Tensor parents[] = {a, b};
  return a.tape().record(std::move(out), parents, [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a.id())) accumulate(t.grad(a.id()), g);
    if (t.requires_grad(b.id())) accumulate(t.grad(b.id()), g);
  });
}

Tensor sub(Tensor a, Tensor b) {
  require_same_shape(a.value(), b.value(), "sub");
  Matrix out = a.value();
  const Matrix& bv = b.value();
  for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] -= bv.data[k];
  const Tensor parents[] = {a, b};
  return a.tape().record(std::move(out), parents, [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a.id())) accumulate(t.grad(a.id()), g);
    if (t.requires_grad(b.id())) {
      Matrix& gb = t.grad(b.id());
      for (std::size_t k = 0; k < gb.data.size(); ++k) gb.data[k] -= g.data[k];
    }
  });
}

Tensor add_bias(Tensor x, Tensor bias) {
  const Matrix& xv = x.value();
  const Matrix& bv = bias.value();
  if (bv.rows != 1 || bv.cols != xv.cols) {
    throw ShapeError("add_bias: shape mismatch " + xv.shape_string() + " vs " + bv.shape_string());
  }
  Matrix out = xv;
  for (std::size_t r = 0; r < out.rows; ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < out.cols; ++c) row[c] += bv.data[c];
  }
  const Tensor parents[] = {x, bias};
  return x.tape().record(std::move(out), parents, [x, bias](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(x.id())) accumulate(t.grad(x.id()), g);
    if (t.requires_grad(bias.id())) {
      Matrix& gb = t.grad(bias.id());
      for (std::size_t r = 0; r < g.rows; ++r) {
        const auto row = g.row(r);
        for (std::size_t c = 0; c < g.cols; ++c) gb.data[c] += row[c];
      }
    }
  });
}

Tensor scale(Tensor x, double factor) {
  Matrix out = x.value();
  for (double& v : out.data) v *= factor;
  const Tensor parents[] = {x};
  return x.tape().record(std::move(out), parents, [x, factor](Tape& t, std::size_t self) {
    kernels::active().axpy(factor, t.grad(self).data.data(), t.grad(x.id()).data.data(),
                           t.grad(self).data.size());
  });
}

Tensor relu(Tensor x) {
  Matrix out = x.value();
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  if (x.tape().tracks_branches()) {
    for (double v : out.data) x.tape().note_branch(v > 0.0);
  }
  const Tensor parents[] = {x};
  return x.tape().record(std::move(out), parents, [x](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& xv = t.value(x.id());
    Matrix& gx = t.grad(x.id());
    for (std::size_t k = 0; k < g.data.size(); ++k) {
      if (xv.data[k] > 0.0) gx.data[k] += g.data[k];
    }
  });
}

Tensor sigmoid(Tensor x) {
  Matrix out = x.value();
  for (double& v : out.data) {
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  const Tensor parents[] = {x};
  return x.tape().record(std::move(out), parents, [x](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix& gx = t.grad(x.id());
    for (std::size_t k = 0; k < g.data.size(); ++k) {
      gx.data[k] += g.data[k] * y.data[k] * (1.0 - y.data[k]);
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: shape mismatch " + parts.front().value().shape_string() +
                       " vs " + p.value().shape_string());
    }
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const Matrix& pv = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(pv.row(r).begin(), pv.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
    }
    offset += pv.cols;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return parts.front().tape().record(std::move(out), parts, [inputs](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    std::size_t offset = 0;
    for (const Tensor& p : inputs) {
      const std::size_t pc = t.value(p.id()).cols;
      if (t.requires_grad(p.id())) {
        Matrix& gp = t.grad(p.id());
        for (std::size_t r = 0; r < g.rows; ++r) {
          for (std::size_t c = 0; c < pc; ++c) gp(r, c) += g(r, offset + c);
        }
      }
      offset += pc;
    }
  });
}

Tensor slice_cols(Tensor x, std::size_t begin, std::size_t end) {
  const Matrix& xv = x.value();
  if (begin > end || end > xv.cols) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") outside " + xv.shape_string());
  }
  Matrix out(xv.rows, end - begin);
  for (std::size_t r = 0; r < xv.rows; ++r) {
    for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = xv(r, c);
  }
  const Tensor parents[] = {x};
  return x.tape().record(std::move(out), parents, [x, begin](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& gx = t.grad(x.id());
    for (std::size_t r = 0; r < g.rows; ++r) {
      for (std::size_t c = 0; c < g.cols; ++c) gx(r, begin + c) += g(r, c);
    }
  });
}

Tensor slice_rows(Tensor x, std::size_t begin, std::size_t end) {
  const Matrix& xv = x.value();
  if (begin > end || end > xv.rows) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") outside " + xv.shape_string());
  }
  Matrix out(end - begin, xv.cols);
  std::copy(xv.data.begin() + static_cast<std::ptrdiff_t>(begin * xv.cols),
            xv.data.begin() + static_cast<std::ptrdiff_t>(end * xv.cols), out.data.begin());
  const Tensor parents[] = {x};
  return x.tape().record(std::move(out), parents, [x, begin](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& gx = t.grad(x.id());
    const std::size_t off = begin * gx.cols;
    for (std::size_t k = 0; k < g.data.size(); ++k) gx.data[off + k] += g.data[k];
  });
}

Tensor gather_rows(Tensor x, std::vector<int> index) {
  return gather_rows(x, std::make_shared<const std::vector<int>>(std::move(index)));
}

Tensor gather_rows(Tensor x, RowIndex index) {
  const Matrix& xv = x.value();
  Matrix zero_bias(1, xv.cols);
  const GatherTerm terms[] = {{x, std::move(index)}};
  const std::size_t rows = terms[0].index->size();
  return gather_sum(terms, x.tape().constant(std::move(zero_bias)), rows);
}

Tensor gather_sum(std::span<const GatherTerm> terms, Tensor bias, std::size_t rows) {
  const Matrix& bv = bias.value();
  const std::size_t cols = bv.cols;
  if (bv.rows != 1) throw ShapeError("gather_sum: bias must be a row, got " + bv.shape_string());
  for (const GatherTerm& term : terms) {
    const Matrix& sv = term.source.value();
    if (sv.cols != cols) {
      throw ShapeError("gather_sum: shape mismatch " + sv.shape_string() + " vs " + bv.shape_string());
    }
    if (term.index) {
      if (term.index->size() != rows) {
        throw ShapeError("gather_sum: index of length " + std::to_string(term.index->size()) +
                         " for " + std::to_string(rows) + " rows");
      }
      for (int i : *term.index) {
        if (i >= static_cast<int>(sv.rows)) {
          throw ShapeError("gather_sum: index " + std::to_string(i) + " outside " + sv.shape_string());
        }
      }
    } else if (sv.rows != rows) {
      throw ShapeError("gather_sum: shape mismatch " + sv.shape_string() + " for " +
                       std::to_string(rows) + " rows");
    }
  }
  Matrix out(rows, cols);
  const auto& k = kernels::active();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(bv.data.begin(), bv.data.end(), out.row(r).begin());
  }
  for (const GatherTerm& term : terms) {
    const Matrix& sv = term.source.value();
    for (std::size_t r = 0; r < rows; ++r) {
      const int src = term.index ? (*term.index)[r] : static_cast<int>(r);
      if (src < 0) continue;
      k.axpy(1.0, sv.row(static_cast<std::size_t>(src)).data(), out.row(r).data(), cols);
    }
  }
  std::vector<Tensor> parents;
  parents.reserve(terms.size() + 1);
  for (const GatherTerm& term : terms) parents.push_back(term.source);
  parents.push_back(bias);
  std::vector<GatherTerm> kept(terms.begin(), terms.end());
  return bias.tape().record(std::move(out), parents,
                            [kept = std::move(kept), bias](Tape& t, std::size_t self) {
                              const Matrix& g = t.grad(self);
                              const auto& k = kernels::active();
                              for (const GatherTerm& term : kept) {
                                if (!t.requires_grad(term.source.id())) continue;
                                Matrix& gs = t.grad(term.source.id());
                                for (std::size_t r = 0; r < g.rows; ++r) {
                                  const int src = term.index ? (*term.index)[r] : static_cast<int>(r);
                                  if (src < 0) continue;
                                  k.axpy(1.0, g.row(r).data(),
                                         gs.row(static_cast<std::size_t>(src)).data(), g.cols);
                                }
                              }
                              if (t.requires_grad(bias.id())) {
                                Matrix& gb = t.grad(bias.id());
                                for (std::size_t r = 0; r < g.rows; ++r) {
                                  k.axpy(1.0, g.row(r).data(), gb.data.data(), g.cols);
                                }
                              }
                            });
}

Tensor row_max_pool_grouped(Tensor x, RowIndex group_index, std::size_t num_groups) {
  const Matrix& xv = x.value();
  const std::vector<int>& group = *group_index;
  if (group.size() != xv.rows) {
    throw ShapeError("row_max_pool_grouped: " + std::to_string(group.size()) +
                     " group indices for " + xv.shape_string());
  }
  const std::size_t cols = xv.cols;
  Matrix out(num_groups, cols);
  std::vector<std::int64_t> argmax(num_groups * cols, -1);
  for (std::size_t r = 0; r < xv.rows; ++r) {
    const int gi = group[r];
    if (gi < 0 || static_cast<std::size_t>(gi) >= num_groups) {
      throw ShapeError("row_max_pool_grouped: group index " + std::to_string(gi) +
                       " outside [0," + std::to_string(num_groups) + ")");
    }
    const auto g = static_cast<std::size_t>(gi);
    const auto row = xv.row(r);
    for (std::size_t c = 0; c < cols; ++c) {
      std::int64_t& am = argmax[g * cols + c];
      // Strict comparison keeps the lowest row index on ties.
      if (am < 0 || row[c] > out(g, c)) {
        out(g, c) = row[c];
        am = static_cast<std::int64_t>(r);
      }
    }
  }
  for (std::size_t g = 0; g < num_groups; ++g) {
    if (cols > 0 && argmax[g * cols] < 0) {
      throw ShapeError("row_max_pool_grouped: group " + std::to_string(g) + " is empty");
    }
  }
  if (x.tape().tracks_branches()) {
    for (std::int64_t am : argmax) x.tape().note_branch(static_cast<std::uint64_t>(am));
  }
  const Tensor parents[] = {x};
  return x.tape().record(std::move(out), parents,
                         [x, cols, argmax = std::move(argmax)](Tape& t, std::size_t self) {
                           const Matrix& g = t.grad(self);
                           Matrix& gx = t.grad(x.id());
                           for (std::size_t k = 0; k < argmax.size(); ++k) {
                             gx(static_cast<std::size_t>(argmax[k]), k % cols) += g.data[k];
                           }
                         });
}

Tensor sum(Tensor x) {
  double acc = 0.0;
  for (double v : x.value().data) acc += v;
  const Tensor parents[] = {x};
  return x.tape().record(Matrix(1, 1, acc), parents, [x](Tape& t, std::size_t self) {
    const double g = t.grad(self).data[0];
    for (double& v : t.grad(x.id()).data) v += g;
  });
}

namespace {

double clamp_logit(double z) { return std::clamp(z, -kLogitClamp, kLogitClamp); }

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double stable_sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

bool selected(std::span<const std::uint8_t> mask, std::size_t i) { return mask.empty() || mask[i] != 0; }

}  // namespace

Tensor bce_with_logits(Tensor logits, std::span<const double> targets,
                       std::span<const std::uint8_t> mask) {
  const Matrix& z = logits.value();
  if (targets.size() != z.size() || (!mask.empty() && mask.size() != z.size())) {
    throw ShapeError("bce_with_logits: " + std::to_string(targets.size()) + " targets / " +
                     std::to_string(mask.size()) + " mask entries for logits " + z.shape_string());
  }
  std::size_t count = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!selected(mask, i)) continue;
    const double zi = clamp_logit(z.data[i]);
    if (logits.tape().tracks_branches()) logits.tape().note_branch(zi != z.data[i]);
    // -[y log s(z) + (1-y) log(1-s(z))] = softplus(z) - y z
    total += softplus(zi) - targets[i] * zi;
    ++count;
  }
  const double value = count == 0 ? 0.0 : total / static_cast<double>(count);
  std::vector<double> tgt(targets.begin(), targets.end());
  std::vector<std::uint8_t> msk(mask.begin(), mask.end());
  const Tensor parents[] = {logits};
  return logits.tape().record(
      Matrix(1, 1, value), parents,
      [logits, count, tgt = std::move(tgt), msk = std::move(msk)](Tape& t, std::size_t self) {
        if (count == 0) return;
        const double g = t.grad(self).data[0] / static_cast<double>(count);
        const Matrix& z = t.value(logits.id());
        Matrix& gz = t.grad(logits.id());
        for (std::size_t i = 0; i < z.size(); ++i) {
          if (!selected(msk, i)) continue;
          const double zi = z.data[i];
          if (zi < -kLogitClamp || zi > kLogitClamp) continue;
          gz.data[i] += g * (stable_sigmoid(zi) - tgt[i]);
        }
      });
}

Tensor softmax_cross_entropy(Tensor logits, std::span<const int> targets,
                             std::span<const std::uint8_t> mask) {
  const Matrix& z = logits.value();
  if (targets.size() != z.rows || (!mask.empty() && mask.size() != z.rows)) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(targets.size()) + " targets / " +
                     std::to_string(mask.size()) + " mask entries for logits " + z.shape_string());
  }
  const std::size_t classes = z.cols;
  Matrix probs(z.rows, classes);
  std::size_t count = 0;
  double total = 0.0;
  for (std::size_t r = 0; r < z.rows; ++r) {
    if (!selected(mask, r)) continue;
    const int tr = targets[r];
    if (tr < 0 || static_cast<std::size_t>(tr) >= classes) {
      throw ShapeError("softmax_cross_entropy: class " + std::to_string(tr) + " outside [0," +
                       std::to_string(classes) + ")");
    }
    const auto row = z.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double se = 0.0;
    for (std::size_t c = 0; c < classes; ++c) se += std::exp(row[c] - mx);
    const double lse = mx + std::log(se);
    for (std::size_t c = 0; c < classes; ++c) probs(r, c) = std::exp(row[c] - lse);
    total += lse - row[static_cast<std::size_t>(tr)];
    ++count;
  }
  const double value = count == 0 ? 0.0 : total / static_cast<double>(count);
  std::vector<int> tgt(targets.begin(), targets.end());
  std::vector<std::uint8_t> msk(mask.begin(), mask.end());
  const Tensor parents[] = {logits};
  return logits.tape().record(
      Matrix(1, 1, value), parents,
      [logits, count, probs = std::move(probs), tgt = std::move(tgt), msk = std::move(msk)](
          Tape& t, std::size_t self) {
        if (count == 0) return;
        const double g = t.grad(self).data[0] / static_cast<double>(count);
        Matrix& gz = t.grad(logits.id());
        for (std::size_t r = 0; r < probs.rows; ++r) {
          if (!selected(msk, r)) continue;
          for (std::size_t c = 0; c < probs.cols; ++c) gz(r, c) += g * probs(r, c);
          gz(r, static_cast<std::size_t>(tgt[r])) -= g;
        }
      });
}

}  // namespace spinegnn::ad
