#include "cfad/fronthaul.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cfad {

void MinifloatFormat::validate() const {
  if (bits_per_complex < 2 || bits_per_complex % 2 != 0)
    throw std::invalid_argument("minifloat: B must be even and positive");
  if (field_bits() > 32) throw std::invalid_argument("minifloat: B/2 must be <= 32");
  if (mantissa_bits < 1) throw std::invalid_argument("minifloat: B_M must be >= 1");
  if (exponent_bits() < 2)
    throw std::invalid_argument("minifloat: needs at least 2 exponent bits");
}

double MinifloatFormat::max_finite() const {
  const int emax = ((1 << exponent_bits()) - 1) - bias();
  return (2.0 - std::ldexp(1.0, -mantissa_bits)) * std::ldexp(1.0, emax);
}

double MinifloatFormat::min_normal() const {
  return std::ldexp(1.0, 1 - bias());
}

MinifloatFormat MinifloatFormat::with_default_mantissa(int bits_per_complex) {
  MinifloatFormat fmt;
  fmt.bits_per_complex = bits_per_complex;
  fmt.mantissa_bits =
      std::clamp(bits_per_complex / 4, 1, bits_per_complex / 2 - 3);
  fmt.validate();
  return fmt;
}

std::uint32_t minifloat_encode(double x, const MinifloatFormat& fmt) {
  if (!std::isfinite(x)) throw std::invalid_argument("minifloat_encode: non-finite input");
  const int mant_bits = fmt.mantissa_bits;
  const int exp_bits = fmt.exponent_bits();
  const int bias = fmt.bias();
  const std::uint32_t sign = std::signbit(x) ? 1u : 0u;
  const std::uint32_t sign_shifted = sign << (fmt.field_bits() - 1);
  double ax = std::fabs(x);
  if (ax == 0.0) return sign_shifted;

  const int emax = ((1 << exp_bits) - 1) - bias;
  const int emin = 1 - bias;

  int e = std::ilogb(ax);  // floor(log2(ax)), exact for finite nonzero
  if (e < emin) e = emin;  // below this the format is subnormal

  // Integer significand q = round_even(ax * 2^(mant_bits - e)); in the normal
  // range q lands in [2^mant_bits, 2^(mant_bits+1)].
  double q = std::nearbyint(std::ldexp(ax, mant_bits - e));
  if (q >= std::ldexp(1.0, mant_bits + 1)) {
    q = std::ldexp(1.0, mant_bits);  // rounded up across a binade
    ++e;
  }

  if (e > emax) {
    // overflow: clamp to the largest finite value
    const std::uint32_t exp_field = (1u << exp_bits) - 1u;
    const std::uint32_t mant_field = (1u << mant_bits) - 1u;
    return sign_shifted | (exp_field << mant_bits) | mant_field;
  }
  const auto qi = static_cast<std::uint32_t>(q);
  if (qi < (1u << mant_bits)) {
    // subnormal: exponent field 0, no hidden bit
    return sign_shifted | qi;
  }
  const auto exp_field = static_cast<std::uint32_t>(e + bias);
  const std::uint32_t mant_field = qi - (1u << mant_bits);
  return sign_shifted | (exp_field << mant_bits) | mant_field;
}

double minifloat_decode(std::uint32_t code, const MinifloatFormat& fmt) {
  const int mant_bits = fmt.mantissa_bits;
  const int exp_bits = fmt.exponent_bits();
  if (code >> (fmt.field_bits() - 1) > 1u)
    throw std::invalid_argument("minifloat_decode: code out of range");
  const bool negative = (code >> (fmt.field_bits() - 1)) & 1u;
  const std::uint32_t exp_field = (code >> mant_bits) & ((1u << exp_bits) - 1u);
  const std::uint32_t mant_field = code & ((1u << mant_bits) - 1u);

  double value;
  if (exp_field == 0) {
    value = std::ldexp(static_cast<double>(mant_field), 1 - fmt.bias() - mant_bits);
  } else {
    const double sig = static_cast<double>((1u << mant_bits) | mant_field);
    value = std::ldexp(sig, static_cast<int>(exp_field) - fmt.bias() - mant_bits);
  }
  return negative ? -value : value;
}

std::complex<double> quantize(std::complex<double> z, const MinifloatFormat& fmt) {
  return {quantize(z.real(), fmt), quantize(z.imag(), fmt)};
}

PayloadMode default_payload_mode(int seq_len, int antennas) {
  return seq_len >= antennas ? PayloadMode::raw_signals : PayloadMode::sample_cov;
}

namespace {

// Payload matrices are block-scaled by a power of two before encoding so the
// largest entry sits in the top binade of the format. Radio-scale samples
// (~1e-6) would otherwise flush to zero in narrow formats. The scale is one
// shared exponent per AP payload and its application is exact, so the codec
// error bounds carry over unchanged.
double block_scale(const Eigen::MatrixXcd& in, const MinifloatFormat& fmt) {
  double max_abs = 0.0;
  for (Eigen::Index j = 0; j < in.cols(); ++j)
    for (Eigen::Index i = 0; i < in.rows(); ++i) {
      max_abs = std::max(max_abs, std::fabs(in(i, j).real()));
      max_abs = std::max(max_abs, std::fabs(in(i, j).imag()));
    }
  if (max_abs == 0.0 || !std::isfinite(max_abs)) return 1.0;
  const int top = ((1 << fmt.exponent_bits()) - 1) - fmt.bias();
  return std::ldexp(1.0, top - std::ilogb(max_abs));
}

Eigen::MatrixXcd quantize_matrix(const Eigen::MatrixXcd& in, const MinifloatFormat& fmt) {
  const double scale = block_scale(in, fmt);
  Eigen::MatrixXcd out(in.rows(), in.cols());
  for (Eigen::Index j = 0; j < in.cols(); ++j)
    for (Eigen::Index i = 0; i < in.rows(); ++i) out(i, j) = quantize(in(i, j) * scale, fmt) / scale;
  return out;
}

Eigen::MatrixXcd psd_projection(const Eigen::MatrixXcd& hermitian) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hermitian);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

ReceivedBatch quantize_payload(const ReceivedBatch& batch, const MinifloatFormat& fmt,
                               PayloadMode mode) {
  fmt.validate();
  ReceivedBatch out;
  out.activity = batch.activity;
  out.active_set = batch.active_set;

  if (mode == PayloadMode::raw_signals) {
    if (!batch.has_raw())
      throw std::invalid_argument("quantize_payload: raw signals were not kept");
    out.raw.reserve(batch.raw.size());
    out.sample_cov.reserve(batch.raw.size());
    for (const auto& y : batch.raw) {
      Eigen::MatrixXcd yq = quantize_matrix(y, fmt);
      Eigen::MatrixXcd cov = (yq * yq.adjoint()) / static_cast<double>(yq.cols());
      cov = ((cov + cov.adjoint()) * 0.5).eval();
      out.raw.push_back(std::move(yq));
      out.sample_cov.push_back(std::move(cov));
    }
    return out;
  }

  out.sample_cov.reserve(batch.sample_cov.size());
  for (const auto& cov : batch.sample_cov) {
    Eigen::MatrixXcd q = quantize_matrix(cov, fmt);
    q = ((q + q.adjoint()) * 0.5).eval();
    out.sample_cov.push_back(psd_projection(q));
  }
  return out;
}

}  // namespace cfad
