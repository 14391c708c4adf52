#pragma once

// Counter-based pseudo-random streams.
//
// Every consumer derives an independent substream from a 64-bit key plus a
// counter, so parallel loops can draw their own numbers without sharing
// state. Identical (key, counter) always yields the identical sequence,
// which keeps resampling bit-for-bit reproducible whether it runs on one
// thread or many.

#include <cstdint>
#include <string_view>

namespace arguq {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

// Small stateful generator seeded from (key, counter).
class SubStream {
 public:
  SubStream(std::uint64_t key, std::uint64_t counter) : state_(key) {
    // Decouple nearby counters by passing them through the mixer twice.
    state_ ^= 0x9E3779B97F4A7C15ull * (counter + 1);
    (void)splitmix64(state_);
    (void)splitmix64(state_);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform index in [0, n). Modulo bias is below 2^-50 for any n that
  // fits a dataset, which is far under the resolution we care about.
  std::size_t next_index(std::size_t n) {
    return static_cast<std::size_t>(next_u64() % n);
  }

  // Uniform double in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

// Deterministic uniform in [0,1) from a bare hash, for stateless consumers.
inline double hash_unit(std::uint64_t h) {
  (void)splitmix64(h);
  return static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-53;
}

}  // namespace arguq
