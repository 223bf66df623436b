#pragma once

#include <cstdint>
#include <random>

namespace spinegnn {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive independent, reproducible seeds for sub-streams
/// (one per augmentation row, per scan, per epoch, ...) from a single user seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t substream) {
  return derive_seed(derive_seed(seed, stream), substream);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(derive_seed(seed, stream));
}

/// Uniform double in [lo, hi). Implemented by hand so the value sequence does not depend on the
/// standard library's distribution implementation.
inline double uniform(Rng& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

/// True with the given probability in percent.
inline bool chance_pct(Rng& rng, double pct) { return pct > 0.0 && uniform(rng, 0.0, 100.0) < pct; }

/// Uniform integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const auto i = static_cast<std::size_t>(uniform(rng, 0.0, static_cast<double>(n)));
  return i < n ? i : n - 1;
}

/// Standard normal via Box-Muller.
double standard_normal(Rng& rng);

}  // namespace spinegnn
