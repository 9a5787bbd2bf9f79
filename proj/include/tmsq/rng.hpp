#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace tmsq {

// Counter-based random substreams. value(seed, stream, i) is a pure function
// of its arguments, so any parallel partition of the index space reproduces
// the same draws and independent streams never interact. SplitMix64 finalizer
// over a Weyl sequence; stream ids live in the top 16 bits of the counter
// space, which caps per-stream counters at 2^48 (far above any record here).

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace detail

inline std::uint64_t counter_value(std::uint64_t seed, std::uint64_t stream,
                                   std::uint64_t i) {
  constexpr std::uint64_t gamma = 0x9E3779B97F4A7C15ull;
  return detail::mix64(seed + gamma * ((stream << 48) + i + 1));
}

// Uniform in [0, 1), 53-bit resolution.
inline double counter_uniform(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t i) {
  return static_cast<double>(counter_value(seed, stream, i) >> 11) * 0x1.0p-53;
}

struct GaussPair {
  double z0, z1;
};

// Standard-normal pair via Box-Muller on counters 2i and 2i+1.
inline GaussPair gaussian_pair(std::uint64_t seed, std::uint64_t stream,
                               std::uint64_t i) {
  const double u1 = counter_uniform(seed, stream, 2 * i);
  const double u2 = counter_uniform(seed, stream, 2 * i + 1);
  const double r = std::sqrt(-2.0 * std::log1p(-u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(phi), r * std::sin(phi)};
}

}  // namespace tmsq
