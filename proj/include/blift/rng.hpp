#pragma once

#include <cstdint>
#include <random>

namespace blift {

// Purpose tags keep the per-replicate RNG streams independent of each other;
// adding a stream never perturbs existing ones.
enum class Stream : uint64_t {
  Graph = 1,
  DgpParams = 2,
  Assignment = 3,
  Noise = 4,
  Estimator = 5,
  Bootstrap = 6,
  Subsample = 7,
  Fixture = 8,
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a decorrelated seed for (base, stream, index), e.g. one per
/// replicate per purpose.
inline uint64_t derive_seed(uint64_t base, Stream stream, uint64_t index = 0) {
  uint64_t h = splitmix64(base);
  h = splitmix64(h ^ (static_cast<uint64_t>(stream) << 32));
  return splitmix64(h ^ index);
}

inline std::mt19937_64 make_rng(uint64_t base, Stream stream, uint64_t index = 0) {
  return std::mt19937_64(derive_seed(base, stream, index));
}

}  // namespace blift
