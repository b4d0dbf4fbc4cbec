#pragma once

#include <span>
#include <vector>

namespace cfad {

// Stationarity polynomial of the clustered coordinate cost, ascending
// coefficients. For cluster size T the degree is 2T-1.
struct StepPolynomial {
  std::vector<double> coeffs;  // coeffs[i] multiplies d^i
  int cluster_size = 0;

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }
  double eval(double d) const;        // Horner
  double eval_deriv(double d) const;
};

// Builds sum_m (a_m^2*d + a_m - b_m) * prod_{m' != m} (1 + a_{m'}*d)^2 by
// convolution. Requires a_m > 0, b_m >= 0.
StepPolynomial build_step_poly(std::span<const double> a, std::span<const double> b);

// Real roots of p. Degree 1 and the cubic use closed forms, higher degrees go
// through companion-matrix eigenvalues. Complex eigenvalues are kept when
// |Im| <= im_tol*(1+|Re|); every kept root gets up to 5 Newton steps.
std::vector<double> real_roots(const StepPolynomial& p, double im_tol = 1e-8);

// The clustered cost f(d) = sum_m [log(1+d*a_m) - d*b_m/(1+d*a_m)], relative
// to d=0. Returns +inf outside the positivity region.
double cluster_cost(std::span<const double> a, std::span<const double> b, double d);

// Coordinate step over a cluster: minimizes cluster_cost over the real
// stationary points with d >= -gamma_k, plus the boundary -gamma_k itself.
double cluster_step(std::span<const double> a, std::span<const double> b, double gamma_k);

}  // namespace cfad
