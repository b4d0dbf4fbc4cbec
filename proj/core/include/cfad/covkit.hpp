#pragma once

#include <Eigen/Dense>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace cfad {

// Raised when a rank-one update would break positive definiteness; the trial
// is unusable past this point.
struct CovarianceBreakdown : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Per-AP covariance model state: the inverse of each Q_m plus its
// log-determinant, maintained incrementally under rank-one coordinate steps.
// Fresh state corresponds to gamma = 0, i.e. Q_m = sigma2*I.
class CovState {
 public:
  CovState(int aps, int dim, double sigma2);

  int aps() const { return static_cast<int>(qinv_.size()); }
  int dim() const { return dim_; }
  double sigma2() const { return sigma2_; }
  const Eigen::MatrixXcd& qinv(int m) const { return qinv_[static_cast<std::size_t>(m)]; }
  double logdet(int m) const { return logdet_[static_cast<std::size_t>(m)]; }

  // Folds Q_m <- Q_m + c*s*s^H into the stored inverse (Sherman-Morrison) and
  // log-determinant (matrix determinant lemma). Throws CovarianceBreakdown if
  // 1 + c*s^H*Qinv*s is not positive, or if it cancels so close to zero that
  // the update would be pure rounding noise (near-total removal of a dominant
  // rank-one term); callers then rebuild the AP state exactly.
  void rank1_update(int m, const Eigen::Ref<const Eigen::VectorXcd>& s, double c);

  // Symmetrizes every stored inverse; called once per sweep to bound drift.
  void rehermitize();

  // Replaces one AP's tracked inverse/log-determinant with exact values.
  void assign(int m, Eigen::MatrixXcd qinv, double logdet);

 private:
  std::vector<Eigen::MatrixXcd> qinv_;
  std::vector<double> logdet_;
  int dim_;
  double sigma2_;
  Eigen::VectorXcd work_;  // scratch for Qinv*s
};

// The quadratic forms a = beta*s^H*Qinv*s and b = beta*s^H*Qinv*Qy*Qinv*s.
struct QuadForms {
  double a = 0.0;
  double b = 0.0;
};
QuadForms quad_forms(const CovState& state, int m,
                     const Eigen::Ref<const Eigen::VectorXcd>& s, double beta_mk,
                     const Eigen::MatrixXcd& sample_cov);

// Negative log-likelihood sum_m [log|Q_m| + tr(Qinv_m * Qy_m)] from the
// incrementally tracked state.
double ml_cost(const CovState& state, std::span<const Eigen::MatrixXcd> sample_cov);

// Single-AP exact coordinate step: the stationary point (b-a)/a^2 of the
// one-block cost, clamped to keep gamma_k + delta >= 0.
double dominant_step(double a, double b, double gamma_k);

// From-scratch reference path (factorization based). Lives beside the
// incremental path so the stopping audit and the oracle tests have an
// independent route to the same numbers.
Eigen::MatrixXcd assemble_covariance(const Eigen::MatrixXcd& signatures,
                                     const Eigen::Ref<const Eigen::VectorXd>& beta_row,
                                     const Eigen::Ref<const Eigen::VectorXd>& gamma,
                                     double sigma2);

// Rebuilds AP m's state from scratch at the given gamma. Fallback for the
// cancellation-limited rank-one removals flagged by rank1_update.
void refresh_state(CovState& state, int m, const Eigen::MatrixXcd& signatures,
                   const Eigen::Ref<const Eigen::VectorXd>& beta_row,
                   const Eigen::Ref<const Eigen::VectorXd>& gamma);
double ml_cost_direct(const Eigen::MatrixXcd& signatures, const Eigen::MatrixXd& beta,
                      const Eigen::Ref<const Eigen::VectorXd>& gamma, double sigma2,
                      std::span<const Eigen::MatrixXcd> sample_cov);

// Coordinate-descent output: the estimate plus its convergence trace.
struct GammaEstimate {
  Eigen::VectorXd gamma;             // K, entrywise >= 0 (watts)
  std::vector<double> cost_trace;    // cost after init and each accepted sweep
  std::vector<int> support_trace;    // #entries above 1e-12, same indexing
  int iterations_run = 0;            // sweeps executed, incl. a rejected one
  double audit_max_rel_err = std::numeric_limits<double>::quiet_NaN();
};

}  // namespace cfad
