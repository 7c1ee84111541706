#pragma once

#include <cstdint>

namespace gatets {

// Counter-based random stream: stateless, so the same (seed, stream, counter)
// triple always yields the same value regardless of call interleaving. Used
// for dropout masks so that training runs are bit-reproducible and resumable
// from a checkpoint.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t stream_bits(uint64_t seed, uint64_t stream, uint64_t counter) {
  return mix64(mix64(seed ^ mix64(stream)) ^ counter);
}

// Uniform double in [0, 1).
inline double stream_uniform(uint64_t seed, uint64_t stream, uint64_t counter) {
  return static_cast<double>(stream_bits(seed, stream, counter) >> 11) *
         0x1.0p-53;
}

}  // namespace gatets
