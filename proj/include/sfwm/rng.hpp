#pragma once

#include <cstdint>

namespace sfwm {

// splitmix64; used to derive independent substream seeds from a master seed
// so that parallel workers produce identical results regardless of scheduling.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed for substream `index` of master seed `seed`.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x51ED270B9ull));
}

}  // namespace sfwm
