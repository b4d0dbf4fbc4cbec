#include "cfad/polyroot.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace cfad {

double StepPolynomial::eval(double d) const {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * d + *it;
  return acc;
}

double StepPolynomial::eval_deriv(double d) const {
  double acc = 0.0;
  for (int i = static_cast<int>(coeffs.size()) - 1; i >= 1; --i)
    acc = acc * d + coeffs[static_cast<std::size_t>(i)] * i;
  return acc;
}

namespace {

// c := conv(c, q), q of fixed small length
void convolve_inplace(std::vector<double>& c, std::span<const double> q) {
  std::vector<double> out(c.size() + q.size() - 1, 0.0);
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = 0; j < q.size(); ++j) out[i + j] += c[i] * q[j];
  c = std::move(out);
}

std::vector<double> cubic_real_roots(double c0, double c1, double c2, double c3) {
  // monic then depressed: d = t - c2/(3 c3), t^3 + p t + q = 0
  const double b = c2 / c3;
  const double c = c1 / c3;
  const double dd = c0 / c3;
  const double shift = b / 3.0;
  const double p = c - b * b / 3.0;
  const double q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + dd;

  std::vector<double> roots;
  const double disc = -4.0 * p * p * p - 27.0 * q * q;
  const double scale = std::max({std::fabs(p) * std::fabs(p) * std::fabs(p),
                                 q * q, 1e-300});
  if (std::fabs(disc) <= 1e-12 * scale) {
    // multiple roots
    if (std::fabs(p) < 1e-300) {
      roots.push_back(0.0);  // triple
    } else {
      roots.push_back(3.0 * q / p);
      roots.push_back(-3.0 * q / (2.0 * p));
    }
  } else if (disc > 0.0) {
    // three distinct real roots, trigonometric form (p < 0 here)
    const double r = 2.0 * std::sqrt(-p / 3.0);
    const double arg = std::clamp(3.0 * q / (p * r), -1.0, 1.0);
    const double theta = std::acos(arg);
    for (int k = 0; k < 3; ++k)
      roots.push_back(r * std::cos((theta - 2.0 * std::numbers::pi * k) / 3.0));
  } else {
    // one real root
    if (p < 0.0) {
      const double r = 2.0 * std::sqrt(-p / 3.0);
      const double arg = std::max(1.0, -3.0 * std::fabs(q) / (p * r));
      const double t = -2.0 * std::copysign(1.0, q) * std::sqrt(-p / 3.0) *
                       std::cosh(std::acosh(arg) / 3.0);
      roots.push_back(t);
    } else if (p > 0.0) {
      const double r = std::sqrt(p / 3.0);
      const double t =
          -2.0 * r * std::sinh(std::asinh(3.0 * q / (2.0 * p * r)) / 3.0);
      roots.push_back(t);
    } else {
      roots.push_back(std::cbrt(-q));
    }
  }
  for (auto& root : roots) root -= shift;
  return roots;
}

std::vector<std::complex<double>> companion_eigenvalues(std::span<const double> monic_low) {
  // monic_low holds c_0..c_{n-1} of a monic degree-n polynomial
  const int n = static_cast<int>(monic_low.size());
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < n; ++i)
    companion(i, n - 1) = -monic_low[static_cast<std::size_t>(i)];
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, /*computeEigenvectors=*/false);
  std::vector<std::complex<double>> eig(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) eig[static_cast<std::size_t>(i)] = es.eigenvalues()[i];
  return eig;
}

double newton_polish(const StepPolynomial& p, double x, int max_steps = 5) {
  double best = x;
  double best_abs = std::fabs(p.eval(x));
  for (int it = 0; it < max_steps; ++it) {
    const double deriv = p.eval_deriv(x);
    if (deriv == 0.0 || !std::isfinite(deriv)) break;
    const double step = p.eval(x) / deriv;
    x -= step;
    if (!std::isfinite(x)) break;
    const double val = std::fabs(p.eval(x));
    if (val < best_abs) {
      best_abs = val;
      best = x;
    }
    if (std::fabs(step) <= 1e-15 * (1.0 + std::fabs(x))) break;
  }
  return best;
}

}  // namespace

StepPolynomial build_step_poly(std::span<const double> a, std::span<const double> b) {
  const std::size_t t = a.size();
  if (t == 0 || b.size() != t) throw std::invalid_argument("build_step_poly: bad sizes");
  for (std::size_t m = 0; m < t; ++m)
    if (!(a[m] > 0.0)) throw std::invalid_argument("build_step_poly: a must be > 0");

  StepPolynomial poly;
  poly.cluster_size = static_cast<int>(t);
  poly.coeffs.assign(2 * t, 0.0);
  for (std::size_t m = 0; m < t; ++m) {
    // (a_m^2 d + a_m - b_m) * prod_{m' != m} (1 + a_{m'} d)^2
    std::vector<double> term = {a[m] - b[m], a[m] * a[m]};
    for (std::size_t mp = 0; mp < t; ++mp) {
      if (mp == m) continue;
      const double quad[3] = {1.0, 2.0 * a[mp], a[mp] * a[mp]};
      convolve_inplace(term, quad);
    }
    for (std::size_t i = 0; i < term.size(); ++i) poly.coeffs[i] += term[i];
  }
  return poly;
}

std::vector<double> real_roots(const StepPolynomial& p, double im_tol) {
  std::vector<double> coeffs = p.coeffs;
  double maxabs = 0.0;
  for (double c : coeffs) maxabs = std::max(maxabs, std::fabs(c));
  if (maxabs == 0.0) return {};
  while (coeffs.size() > 1 && std::fabs(coeffs.back()) <= 1e-14 * maxabs)
    coeffs.pop_back();
  const int degree = static_cast<int>(coeffs.size()) - 1;
  if (degree < 1) return {};

  std::vector<double> roots;
  if (degree == 1) {
    roots.push_back(-coeffs[0] / coeffs[1]);
  } else if (degree == 2) {
    const double a2 = coeffs[2], a1 = coeffs[1], a0 = coeffs[0];
    const double disc = a1 * a1 - 4.0 * a2 * a0;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      const double q = -0.5 * (a1 + std::copysign(sq, a1));
      roots.push_back(q / a2);
      if (q != 0.0) roots.push_back(a0 / q);
      else roots.push_back(0.0);
    }
  } else if (degree == 3) {
    roots = cubic_real_roots(coeffs[0], coeffs[1], coeffs[2], coeffs[3]);
  } else {
    std::vector<double> monic_low(coeffs.begin(), coeffs.end() - 1);
    for (auto& c : monic_low) c /= coeffs.back();
    for (const auto& eig : companion_eigenvalues(monic_low))
      if (std::fabs(eig.imag()) <= im_tol * (1.0 + std::fabs(eig.real())))
        roots.push_back(eig.real());
  }

  if (degree > 1)
    for (auto& r : roots) r = newton_polish(p, r);

  std::sort(roots.begin(), roots.end());
  std::vector<double> unique;
  for (double r : roots)
    if (unique.empty() || r - unique.back() > 1e-9 * (1.0 + std::fabs(r)))
      unique.push_back(r);
  return unique;
}

double cluster_cost(std::span<const double> a, std::span<const double> b, double d) {
  double cost = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m) {
    const double den = 1.0 + d * a[m];
    if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
    cost += std::log1p(d * a[m]) - d * b[m] / den;
  }
  return cost;
}

double cluster_step(std::span<const double> a, std::span<const double> b, double gamma_k) {
  const std::size_t t = a.size();
  if (t == 0 || b.size() != t) throw std::invalid_argument("cluster_step: bad sizes");
  if (!(gamma_k >= 0.0)) throw std::invalid_argument("cluster_step: gamma_k must be >= 0");

  // Rescale so max a = 1; d -> d*s keeps the cost values and maps roots back
  // by 1/s, which keeps companion matrices well conditioned.
  double s = 0.0;
  for (double am : a) s = std::max(s, am);
  if (!(s > 0.0)) throw std::invalid_argument("cluster_step: a must be > 0");
  std::vector<double> as(t), bs(t);
  for (std::size_t m = 0; m < t; ++m) {
    as[m] = a[m] / s;
    bs[m] = b[m] / s;
  }
  const double bound = gamma_k * s;

  const StepPolynomial poly = build_step_poly(as, bs);
  const std::vector<double> roots = real_roots(poly);

  double best = -bound;
  double best_cost = cluster_cost(as, bs, -bound);
  for (double r : roots) {
    if (r < -bound) continue;
    const double cost = cluster_cost(as, bs, r);
    if (cost < best_cost) {
      best_cost = cost;
      best = r;
    }
  }
  if (best == -bound) return -gamma_k;  // exact at the clamp boundary
  return best / s;
}

}  // namespace cfad
