#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace cfad {

// Empirical quantile with linear interpolation between order statistics.
// q = 0 returns the minimum, q = 1 the maximum. `sorted` must be ascending.
inline double empirical_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  if (q <= 0.0) return sorted.front();
  if (q >= 1.0) return sorted.back();
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }
// dBm <-> watts
inline double dbm_to_watts(double dbm) { return db_to_linear(dbm - 30.0); }
inline double watts_to_dbm(double w) { return linear_to_db(w) + 30.0; }

}  // namespace cfad
