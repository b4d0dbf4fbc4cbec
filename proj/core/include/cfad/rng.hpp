#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace cfad {

// Named random substreams. Everything stochastic in the simulator is keyed by
// (root seed, stream, index) so that any component (placements, shadowing,
// activity, ...) can be redrawn independently of the others and trial results
// do not depend on scheduling order.
enum class Stream : std::uint64_t {
  placement = 1,
  shadowing,
  sequences,
  activity,
  channels,
  noise,
  permutation,
  trial,
  calibration,
};

// SplitMix64 finalizer; full-period bijective mixer over 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t substream_seed(std::uint64_t root, Stream stream,
                                       std::uint64_t index = 0) {
  return mix64(mix64(root ^ mix64(static_cast<std::uint64_t>(stream))) + index);
}

inline std::mt19937_64 substream_rng(std::uint64_t root, Stream stream,
                                     std::uint64_t index = 0) {
  return std::mt19937_64(substream_seed(root, stream, index));
}

// One draw of a circularly symmetric complex Gaussian with unit variance
// (variance 1/2 per real dimension).
inline std::complex<double> complex_gaussian(std::mt19937_64& rng) {
  static constexpr double kHalfSqrt = 0.7071067811865476;  // 1/sqrt(2)
  std::normal_distribution<double> n(0.0, 1.0);
  const double re = n(rng);
  const double im = n(rng);
  return {re * kHalfSqrt, im * kHalfSqrt};
}

}  // namespace cfad
