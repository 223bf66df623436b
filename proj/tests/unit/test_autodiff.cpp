#include "doctest.h"

#include <cmath>
#include <memory>
#include <vector>

#include "gradcheck.hpp"
#include "spinegnn/autodiff.hpp"
#include "spinegnn/error.hpp"

using namespace spinegnn;
using gradcheck::random_matrix;

namespace {

// Reduces a tensor to a scalar through a fixed random projection so that every output entry
// carries a distinct weight.
ad::Tensor project(ad::Tensor t, std::uint64_t seed) {
  Rng rng(seed);
  auto& tape = t.tape();
  return ad::sum(ad::matmul(t, tape.constant(random_matrix(rng, t.cols(), 1))));
}

void expect_grad_ok(std::vector<Matrix> inputs, const gradcheck::LossFn& fn, double tol = 1e-4) {
  const auto r = gradcheck::check_inputs(std::move(inputs), fn);
  CHECK(r.checked > 0);
  CHECK(r.max_rel <= tol);
}

}  // namespace

TEST_CASE("relu and max pool forward values") {
  ad::Tape tape;
  auto r = ad::relu(tape.constant(Matrix(1, 2, {-1.0, 2.0})));
  CHECK(r.value() == Matrix(1, 2, {0.0, 2.0}));

  auto x = tape.constant(Matrix(2, 2, {1, 5, 3, 2}));
  auto p = ad::row_max_pool_grouped(x, std::make_shared<const std::vector<int>>(std::vector<int>{0, 0}), 1);
  CHECK(p.value() == Matrix(1, 2, {3, 5}));
}

TEST_CASE("loss = sum(W) gives all-ones gradient") {
  ad::Parameter w("w", Matrix(3, 4, 0.25));
  ad::Tape tape;
  tape.backward(ad::sum(tape.param(w)));
  CHECK(w.grad == Matrix(3, 4, 1.0));
}

TEST_CASE("max pool gradient at a tie goes to the lowest row") {
  ad::Tape tape;
  auto x = tape.variable(Matrix(3, 1, {2.0, 2.0, 1.0}));
  auto group = std::make_shared<const std::vector<int>>(std::vector<int>{0, 0, 0});
  tape.backward(ad::sum(ad::row_max_pool_grouped(x, group, 1)));
  CHECK(x.grad() == Matrix(3, 1, {1.0, 0.0, 0.0}));
}

TEST_CASE("shape mismatches throw") {
  ad::Tape tape;
  auto a = tape.constant(Matrix(2, 3));
  auto b = tape.constant(Matrix(2, 3));
  CHECK_THROWS_AS(ad::matmul(a, b), ShapeError);
  CHECK_THROWS_AS(ad::add(a, tape.constant(Matrix(3, 2))), ShapeError);
  CHECK_THROWS_AS(tape.backward(a), ShapeError);
}

TEST_CASE("matmul gradient, 4x3 times 3x2") {
  Rng rng(11);
  const auto r = gradcheck::check_inputs({random_matrix(rng, 4, 3), random_matrix(rng, 3, 2)},
                                         [](ad::Tape&, std::span<ad::Tensor> v) {
                                           return project(ad::matmul(v[0], v[1]), 1);
                                         });
  CHECK(r.max_rel < 1e-6);
}

TEST_CASE("gradients of every operation match finite differences") {
  Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const std::uint64_t s = 100 + trial;
    expect_grad_ok({random_matrix(rng, 5, 4), random_matrix(rng, 4, 3), random_matrix(rng, 1, 3)},
                   [s](ad::Tape&, std::span<ad::Tensor> v) { return project(ad::linear(v[0], v[1], v[2]), s); });
    expect_grad_ok({random_matrix(rng, 3, 4), random_matrix(rng, 3, 4)},
                   [s](ad::Tape&, std::span<ad::Tensor> v) { return project(ad::add(v[0], v[1]), s); });
    expect_grad_ok({random_matrix(rng, 3, 4), random_matrix(rng, 3, 4)},
                   [s](ad::Tape&, std::span<ad::Tensor> v) { return project(ad::sub(v[0], v[1]), s); });
    expect_grad_ok({random_matrix(rng, 6, 2), random_matrix(rng, 1, 2)},
                   [s](ad::Tape&, std::span<ad::Tensor> v) { return project(ad::add_bias(v[0], v[1]), s); });
    expect_grad_ok({random_matrix(rng, 3, 3)},
                   [s](ad::Tape&, std::span<ad::Tensor> v) { return project(ad::scale(v[0], -2.5), s); });
    expect_grad_ok({random_matrix(rng, 4, 5)},
                   [s](ad::Tape&, std::span<ad::Tensor> v) { return project(ad::relu(v[0]), s); });
    expect_grad_ok({random_matrix(rng, 4, 5, -4.0, 4.0)},
                   [s](ad::Tape&, std::span<ad::Tensor> v) { return project(ad::sigmoid(v[0]), s); });
    expect_grad_ok({random_matrix(rng, 3, 2), random_matrix(rng, 3, 4)}, [s](ad::Tape&, std::span<ad::Tensor> v) {
      const ad::Tensor parts[] = {v[0], v[1], v[0]};
      return project(ad::concat_cols(parts), s);
    });
    expect_grad_ok({random_matrix(rng, 4, 6)},
                   [s](ad::Tape&, std::span<ad::Tensor> v) { return project(ad::slice_cols(v[0], 1, 4), s); });
    expect_grad_ok({random_matrix(rng, 6, 3)},
                   [s](ad::Tape&, std::span<ad::Tensor> v) { return project(ad::slice_rows(v[0], 2, 5), s); });
    expect_grad_ok({random_matrix(rng, 4, 3)}, [s](ad::Tape&, std::span<ad::Tensor> v) {
      return project(ad::gather_rows(v[0], std::vector<int>{3, 0, -1, 0, 2, 3}), s);
    });
    expect_grad_ok({random_matrix(rng, 4, 3), random_matrix(rng, 5, 3), random_matrix(rng, 1, 3)},
                   [s](ad::Tape&, std::span<ad::Tensor> v) {
                     auto idx = std::make_shared<const std::vector<int>>(std::vector<int>{1, 1, -1, 3, 0});
                     const ad::GatherTerm two[] = {{v[0], idx}, {v[1], nullptr}};
                     return project(ad::gather_sum(two, v[2], 5), s);
                   });
    expect_grad_ok({random_matrix(rng, 7, 4)}, [s](ad::Tape&, std::span<ad::Tensor> v) {
      auto group = std::make_shared<const std::vector<int>>(std::vector<int>{0, 1, 0, 2, 1, 2, 0});
      return project(ad::row_max_pool_grouped(v[0], group, 3), s);
    });
    expect_grad_ok({random_matrix(rng, 6, 1, -5.0, 5.0)}, [](ad::Tape&, std::span<ad::Tensor> v) {
      const double t[] = {1, 0, 1, 1, 0, 0};
      const std::uint8_t m[] = {1, 1, 0, 1, 1, 1};
      return ad::bce_with_logits(v[0], t, m);
    });
    expect_grad_ok({random_matrix(rng, 5, 6, -3.0, 3.0)}, [](ad::Tape&, std::span<ad::Tensor> v) {
      const int t[] = {0, 5, 2, 2, 4};
      const std::uint8_t m[] = {1, 1, 0, 1, 1};
      return ad::softmax_cross_entropy(v[0], t, m);
    });
  }
}

TEST_CASE("binary cross-entropy values") {
  ad::Tape tape;
  const double one[] = {1.0};
  CHECK(ad::bce_with_logits(tape.constant(Matrix(1, 1, 0.0)), one).item() == doctest::Approx(std::log(2.0)));
  const double targets[] = {1.0, 0.0};
  auto perfect = ad::bce_with_logits(tape.constant(Matrix(2, 1, {1e6, -1e6})), targets);
  CHECK(perfect.item() < 1e-9);
  const std::uint8_t none[] = {0, 0};
  CHECK(ad::bce_with_logits(tape.constant(Matrix(2, 1, {1.0, 2.0})), targets, none).item() == 0.0);
}

TEST_CASE("softmax cross-entropy matches the naive formula") {
  ad::Tape tape;
  const int t0[] = {17};
  CHECK(ad::softmax_cross_entropy(tape.constant(Matrix(1, 28, 0.0)), t0).item() ==
        doctest::Approx(std::log(28.0)).epsilon(1e-12));

  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto logits = random_matrix(rng, 4, 28, -8.0, 8.0);
    const int t[] = {0, 27, 13, 5};
    const double got = ad::softmax_cross_entropy(tape.constant(logits), t).item();
    double want = 0.0;
    for (std::size_t r = 0; r < 4; ++r) {
      double z = 0.0;
      for (std::size_t c = 0; c < 28; ++c) z += std::exp(logits(r, c));
      want += -std::log(std::exp(logits(r, static_cast<std::size_t>(t[r]))) / z);
    }
    want /= 4.0;
    CHECK(std::abs(got - want) < 1e-10);
  }
}

TEST_CASE("shared parameter accumulates gradient over uses") {
  ad::Parameter w("w", Matrix(2, 2, {1, 2, 3, 4}));
  ad::Tape tape;
  auto x = tape.constant(Matrix(1, 2, {1.0, 1.0}));
  auto y = ad::matmul(ad::matmul(x, tape.param(w)), tape.param(w));
  tape.backward(ad::sum(y));
  // x^T (1 W^T) + (x W)^T 1
  CHECK(w.grad == Matrix(2, 2, {7, 11, 9, 13}));
}

TEST_CASE("branch signature follows relu signs and max-pool winners") {
  auto sig = [](Matrix m) {
    ad::Tape tape(false);
    tape.set_branch_tracking(true);
    auto x = tape.constant(std::move(m));
    auto group = std::make_shared<const std::vector<int>>(std::vector<int>{0, 0});
    ad::row_max_pool_grouped(ad::relu(x), group, 1);
    return tape.branch_signature();
  };
  const auto base = sig(Matrix(2, 2, {1.0, -1.0, 0.5, 2.0}));
  CHECK(sig(Matrix(2, 2, {1.5, -0.5, 0.25, 3.0})) == base);
  CHECK(sig(Matrix(2, 2, {1.0, 0.1, 0.5, 2.0})) != base);   // relu sign
  CHECK(sig(Matrix(2, 2, {1.0, -1.0, 1.5, 2.0})) != base);  // max-pool winner

  ad::Tape plain(false);
  ad::relu(plain.constant(Matrix(1, 1, 1.0)));
  CHECK(plain.branch_signature() == 0);
}
