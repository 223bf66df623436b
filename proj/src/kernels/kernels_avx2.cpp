// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "spinegnn/kernels.hpp"

namespace spinegnn::kernels {
namespace {

// Every output element is accumulated as c = fma(a_p, b_p, c) for p = 0..k-1 in every code path
// below (vector blocks, single rows, column tails), so its value does not depend on where the
// row or column sits in the matrix.

inline void gemm_row_block6x8(const double* a, std::size_t lda, const double* b, std::size_t n,
                              double* c, std::size_t k, bool accumulate) {
  __m256d c00, c01, c10, c11, c20, c21, c30, c31, c40, c41, c50, c51;
  if (accumulate) {
    c00 = _mm256_loadu_pd(c);
    c01 = _mm256_loadu_pd(c + 4);
    c10 = _mm256_loadu_pd(c + n);
    c11 = _mm256_loadu_pd(c + n + 4);
    c20 = _mm256_loadu_pd(c + 2 * n);
    c21 = _mm256_loadu_pd(c + 2 * n + 4);
    c30 = _mm256_loadu_pd(c + 3 * n);
    c31 = _mm256_loadu_pd(c + 3 * n + 4);
    c40 = _mm256_loadu_pd(c + 4 * n);
    c41 = _mm256_loadu_pd(c + 4 * n + 4);
    c50 = _mm256_loadu_pd(c + 5 * n);
    c51 = _mm256_loadu_pd(c + 5 * n + 4);
  } else {
    c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = c40 = c41 = c50 = c51 = _mm256_setzero_pd();
  }
  const double* a0 = a;
  const double* a1 = a + lda;
  const double* a2 = a + 2 * lda;
  const double* a3 = a + 3 * lda;
  const double* a4 = a + 4 * lda;
  const double* a5 = a + 5 * lda;
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * n);
    const __m256d b1 = _mm256_loadu_pd(b + p * n + 4);
    __m256d av = _mm256_broadcast_sd(a0 + p);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(a1 + p);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(a2 + p);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(a3 + p);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
    av = _mm256_broadcast_sd(a4 + p);
    c40 = _mm256_fmadd_pd(av, b0, c40);
    c41 = _mm256_fmadd_pd(av, b1, c41);
    av = _mm256_broadcast_sd(a5 + p);
    c50 = _mm256_fmadd_pd(av, b0, c50);
    c51 = _mm256_fmadd_pd(av, b1, c51);
  }
  _mm256_storeu_pd(c, c00);
  _mm256_storeu_pd(c + 4, c01);
  _mm256_storeu_pd(c + n, c10);
  _mm256_storeu_pd(c + n + 4, c11);
  _mm256_storeu_pd(c + 2 * n, c20);
  _mm256_storeu_pd(c + 2 * n + 4, c21);
  _mm256_storeu_pd(c + 3 * n, c30);
  _mm256_storeu_pd(c + 3 * n + 4, c31);
  _mm256_storeu_pd(c + 4 * n, c40);
  _mm256_storeu_pd(c + 4 * n + 4, c41);
  _mm256_storeu_pd(c + 5 * n, c50);
  _mm256_storeu_pd(c + 5 * n + 4, c51);
}

inline void gemm_row_block1x4(const double* a, const double* b, std::size_t n, double* c,
                              std::size_t k, bool accumulate) {
  __m256d acc = accumulate ? _mm256_loadu_pd(c) : _mm256_setzero_pd();
  for (std::size_t p = 0; p < k; ++p) {
    acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p), _mm256_loadu_pd(b + p * n), acc);
  }
  _mm256_storeu_pd(c, acc);
}

inline void gemm_element(const double* a, const double* b, std::size_t n, double* c,
                         std::size_t k, bool accumulate) {
  double acc = accumulate ? *c : 0.0;
  for (std::size_t p = 0; p < k; ++p) acc = std::fma(a[p], b[p * n], acc);
  *c = acc;
}

void gemm_avx2(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
  const std::size_t n8 = n - n % 8;
  const std::size_t n4 = n - n % 4;
  std::size_t i = 0;
  for (; i + 6 <= m; i += 6) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n8; j += 8) {
      gemm_row_block6x8(arow, k, b + j, n, crow + j, k, accumulate);
    }
    for (std::size_t r = 0; r < 6; ++r) {
      for (std::size_t j = n8; j < n4; j += 4) {
        gemm_row_block1x4(arow + r * k, b + j, n, crow + r * n + j, k, accumulate);
      }
      for (std::size_t j = n4; j < n; ++j) {
        gemm_element(arow + r * k, b + j, n, crow + r * n + j, k, accumulate);
      }
    }
  }
  for (; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n4; j += 4) {
      gemm_row_block1x4(arow, b + j, n, crow + j, k, accumulate);
    }
    for (std::size_t j = n4; j < n; ++j) gemm_element(arow, b + j, n, crow + j, k, accumulate);
  }
}

void gemm_tn_block(const double* a, const double* g, double* c, std::size_t m, std::size_t k,
                   std::size_t n) {
  // c[p][j] accumulates a[i][p] * g[i][j] over i in increasing order.
  const std::size_t n8 = n - n % 8;
  const std::size_t n4 = n - n % 4;
  std::size_t p = 0;
  for (; p + 4 <= k; p += 4) {
    for (std::size_t j = 0; j < n8; j += 8) {
      double* c0 = c + p * n + j;
      __m256d c00 = _mm256_loadu_pd(c0), c01 = _mm256_loadu_pd(c0 + 4);
      __m256d c10 = _mm256_loadu_pd(c0 + n), c11 = _mm256_loadu_pd(c0 + n + 4);
      __m256d c20 = _mm256_loadu_pd(c0 + 2 * n), c21 = _mm256_loadu_pd(c0 + 2 * n + 4);
      __m256d c30 = _mm256_loadu_pd(c0 + 3 * n), c31 = _mm256_loadu_pd(c0 + 3 * n + 4);
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g + i * n + j;
        const double* arow = a + i * k + p;
        const __m256d g0 = _mm256_loadu_pd(grow);
        const __m256d g1 = _mm256_loadu_pd(grow + 4);
        __m256d av = _mm256_broadcast_sd(arow);
        c00 = _mm256_fmadd_pd(av, g0, c00);
        c01 = _mm256_fmadd_pd(av, g1, c01);
        av = _mm256_broadcast_sd(arow + 1);
        c10 = _mm256_fmadd_pd(av, g0, c10);
        c11 = _mm256_fmadd_pd(av, g1, c11);
        av = _mm256_broadcast_sd(arow + 2);
        c20 = _mm256_fmadd_pd(av, g0, c20);
        c21 = _mm256_fmadd_pd(av, g1, c21);
        av = _mm256_broadcast_sd(arow + 3);
        c30 = _mm256_fmadd_pd(av, g0, c30);
        c31 = _mm256_fmadd_pd(av, g1, c31);
      }
      _mm256_storeu_pd(c0, c00);
      _mm256_storeu_pd(c0 + 4, c01);
      _mm256_storeu_pd(c0 + n, c10);
      _mm256_storeu_pd(c0 + n + 4, c11);
      _mm256_storeu_pd(c0 + 2 * n, c20);
      _mm256_storeu_pd(c0 + 2 * n + 4, c21);
      _mm256_storeu_pd(c0 + 3 * n, c30);
      _mm256_storeu_pd(c0 + 3 * n + 4, c31);
    }
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t j = n8; j < n; ++j) {
        double acc = c[(p + r) * n + j];
        for (std::size_t i = 0; i < m; ++i) acc = std::fma(a[i * k + p + r], g[i * n + j], acc);
        c[(p + r) * n + j] = acc;
      }
    }
  }
  for (; p < k; ++p) {
    for (std::size_t j = 0; j < n4; j += 4) {
      __m256d acc = _mm256_loadu_pd(c + p * n + j);
      for (std::size_t i = 0; i < m; ++i) {
        acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + i * k + p), _mm256_loadu_pd(g + i * n + j),
                              acc);
      }
      _mm256_storeu_pd(c + p * n + j, acc);
    }
    for (std::size_t j = n4; j < n; ++j) {
      double acc = c[p * n + j];
      for (std::size_t i = 0; i < m; ++i) acc = std::fma(a[i * k + p], g[i * n + j], acc);
      c[p * n + j] = acc;
    }
  }
}

void gemm_tn_avx2(const double* a, const double* g, double* c, std::size_t m, std::size_t k,
                  std::size_t n) {
  // Row panels keep the slices of a and g cache resident; panels run in order, so every element
  // still sees i in increasing order.
  constexpr std::size_t kPanel = 128;
  for (std::size_t i0 = 0; i0 < m; i0 += kPanel) {
    gemm_tn_block(a + i0 * k, g + i0 * n, c, std::min(kPanel, m - i0), k, n);
  }
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    _mm256_storeu_pd(y + j, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + j), _mm256_loadu_pd(y + j)));
  }
  for (; j < n; ++j) y[j] = std::fma(alpha, x[j], y[j]);
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable t{Backend::avx2, &gemm_avx2, &gemm_tn_avx2, &axpy_avx2};
  return &t;
}

}  // namespace spinegnn::kernels
