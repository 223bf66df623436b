#include "doctest.h"

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "spinegnn/error.hpp"
#include "spinegnn/wilcoxon.hpp"

using namespace spinegnn;
using namespace spinegnn::stats;

namespace {

std::vector<double> normal_sample(Rng& rng, std::size_t n, double shift = 0.0) {
  std::vector<double> v(n);
  for (double& x : v) x = standard_normal(rng) + shift;
  return v;
}

}  // namespace

TEST_CASE("identical samples give p = 1") {
  const std::vector<double> a = {0.9, 0.8, 1.0, 0.95};
  const auto r = wilcoxon_signed_rank(a, a);
  CHECK(r.p_value == 1.0);
  CHECK(r.n == 0);
}

TEST_CASE("n = 5, all differences positive: p = 2/32") {
  const std::vector<double> a = {1, 2, 3, 4, 5}, b = {0, 0, 0, 0, 0};
  const auto r = wilcoxon_signed_rank(a, b);
  CHECK(r.exact);
  CHECK(r.p_value == doctest::Approx(0.0625).epsilon(1e-15));
  CHECK(r.w_plus == 15.0);
  CHECK(oracles::enumerate_wilcoxon_p(a, b) == 0.0625);
}

TEST_CASE("exact branch matches sign-pattern enumeration") {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + uniform_index(rng, 10);
    auto a = normal_sample(rng, n, 0.3), b = normal_sample(rng, n);
    if (t % 3 == 0) {
      // ties and zero differences
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = std::round(a[i] * 2.0);
        b[i] = std::round(b[i] * 2.0);
      }
    }
    const auto r = wilcoxon_exact(a, b);
    CHECK(r.p_value == doctest::Approx(oracles::enumerate_wilcoxon_p(a, b)).epsilon(1e-12));
    CHECK(r.p_value > 0.0);
    CHECK(r.p_value <= 1.0);
  }
}

TEST_CASE("exact and normal branches agree at n = 12") {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const auto a = normal_sample(rng, 12, uniform(rng, -1.0, 1.0)), b = normal_sample(rng, 12);
    CHECK(std::abs(wilcoxon_exact(a, b).p_value - wilcoxon_normal(a, b).p_value) <= 0.02);
  }
}

TEST_CASE("branch selection and symmetry") {
  Rng rng(3);
  const auto a = normal_sample(rng, 20, 0.5), b = normal_sample(rng, 20);
  const auto r = wilcoxon_signed_rank(a, b);
  CHECK_FALSE(r.exact);
  CHECK(r.p_value == wilcoxon_normal(a, b).p_value);
  CHECK(wilcoxon_signed_rank(a, b, 25).exact);
  CHECK(wilcoxon_signed_rank(b, a).p_value == doctest::Approx(r.p_value));
  const std::vector<double> one = {1.0};
  CHECK_THROWS_AS(wilcoxon_signed_rank(a, one), ShapeError);
}

TEST_CASE("p-value falls as a positive shift grows") {
  Rng rng(4);
  for (std::size_t n : {8u, 30u}) {
    const auto base = normal_sample(rng, n), b = normal_sample(rng, n);
    double prev = 2.0;
    for (double shift = 0.5; shift < 6.0; shift += 0.25) {
      std::vector<double> a = base;
      for (double& x : a) x += shift;
      // Start once W+ sits above its mean; from there the shift can only push p down.
      const auto r = wilcoxon_signed_rank(a, b);
      if (r.w_plus < static_cast<double>(r.n * (r.n + 1)) / 4.0) continue;
      CHECK(r.p_value <= prev);
      CHECK(r.p_value > 0.0);
      prev = r.p_value;
    }
  }
}
