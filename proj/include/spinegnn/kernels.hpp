#pragma once

// Inner-loop arithmetic kernels behind the autodiff tape. Every kernel has a portable scalar
// reference implementation and, on x86-64, an AVX2+FMA variant. The variant is chosen once at
// runtime from the CPU's capabilities (overridable with SPINEGNN_KERNELS=scalar|avx2).
//
// Within one backend each output element is produced by the same sequence of floating-point
// operations regardless of its row position, so row permutations of the inputs permute the
// outputs bit-exactly. Across backends results agree to rounding only (AVX2 uses fused
// multiply-add).

#include <cstddef>
#include <string_view>

namespace spinegnn::kernels {

enum class Backend { scalar, avx2 };

struct KernelTable {
  Backend backend;
  /// c[m x n] = (accumulate ? c : 0) + a[m x k] * b[k x n]
  void (*gemm)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate);
  /// c[k x n] += a[m x k]^T * g[m x n]
  void (*gemm_tn)(const double* a, const double* g, double* c, std::size_t m, std::size_t k,
                  std::size_t n);
  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

const KernelTable& scalar_table();
/// Null when the build has no AVX2 variant.
const KernelTable* avx2_table();

bool backend_available(Backend b);
const KernelTable& table(Backend b);

/// Currently selected kernels.
const KernelTable& active();
Backend active_backend();
/// Throws spinegnn::ConfigError when the requested backend is not available on this CPU.
void set_backend(Backend b);

std::string_view backend_name(Backend b);

}  // namespace spinegnn::kernels
