#pragma once

#include <complex>
#include <cstdint>

#include "cfad/netmodel.hpp"

namespace cfad {

// Reduced-width floating point format for the AP->CPU links: each complex
// value gets B bits, each real part B/2 as [sign | exponent | mantissa]
// (MSB first). Hidden leading bit, round-to-nearest-even, gradual underflow,
// no infinities: overflow clamps to the largest finite value.
struct MinifloatFormat {
  int bits_per_complex = 20;  // B, even
  int mantissa_bits = 5;      // B_M per real

  int field_bits() const { return bits_per_complex / 2; }
  int exponent_bits() const { return field_bits() - 1 - mantissa_bits; }
  int bias() const { return (1 << (exponent_bits() - 1)) - 1; }
  double max_finite() const;
  double min_normal() const;
  void validate() const;  // throws std::invalid_argument

  // B_M = B/4 rounded into the valid range; the split the experiments use
  // unless configured otherwise.
  static MinifloatFormat with_default_mantissa(int bits_per_complex);
};

// Codes are right-aligned in the returned word; field_bits() <= 32.
std::uint32_t minifloat_encode(double x, const MinifloatFormat& fmt);
double minifloat_decode(std::uint32_t code, const MinifloatFormat& fmt);

inline double quantize(double x, const MinifloatFormat& fmt) {
  return minifloat_decode(minifloat_encode(x, fmt), fmt);
}
std::complex<double> quantize(std::complex<double> z, const MinifloatFormat& fmt);

enum class PayloadMode {
  raw_signals,  // quantize Y_m entries, CPU recomputes the sample covariance
  sample_cov,   // quantize Q_Y,m entries, re-Hermitize and project to PSD
};

// The cheaper payload direction: raw signals when L >= N, covariances when
// L < N.
PayloadMode default_payload_mode(int seq_len, int antennas);

// Quantizes the per-AP payload entrywise. Each AP's matrix is block-scaled by
// a power of two (one shared exponent, exact in both directions) so the
// largest entry lands in the format's top binade before encoding.
ReceivedBatch quantize_payload(const ReceivedBatch& batch, const MinifloatFormat& fmt,
                               PayloadMode mode);

}  // namespace cfad
