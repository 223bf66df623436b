#include <atomic>
#include <cstdlib>
#include <string>

#include "spinegnn/error.hpp"
#include "spinegnn/kernels.hpp"

namespace spinegnn::kernels {

#if !defined(SPINEGNN_HAVE_AVX2)
const KernelTable* avx2_table() { return nullptr; }
#endif

namespace {

bool cpu_has_avx2_fma() {
#if defined(SPINEGNN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  if (const char* env = std::getenv("SPINEGNN_KERNELS")) {
    const std::string v(env);
    if (v == "scalar") return Backend::scalar;
    if (v == "avx2" && cpu_has_avx2_fma()) return Backend::avx2;
  }
  return cpu_has_avx2_fma() ? Backend::avx2 : Backend::scalar;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> t{&table(initial_backend())};
  return t;
}

}  // namespace

bool backend_available(Backend b) {
  return b == Backend::scalar || (avx2_table() != nullptr && cpu_has_avx2_fma());
}

const KernelTable& table(Backend b) {
  if (!backend_available(b)) {
    throw ConfigError("kernel backend '" + std::string(backend_name(b)) + "' is not available");
  }
  return b == Backend::avx2 ? *avx2_table() : scalar_table();
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

Backend active_backend() { return active().backend; }

void set_backend(Backend b) { current().store(&table(b), std::memory_order_relaxed); }

std::string_view backend_name(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

}  // namespace spinegnn::kernels
