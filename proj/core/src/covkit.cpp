#include "cfad/covkit.hpp"

#include <Eigen/Cholesky>
#include <cassert>
#include <cmath>
#include <sstream>

namespace cfad {

CovState::CovState(int aps, int dim, double sigma2) : dim_(dim), sigma2_(sigma2) {
  if (aps < 1 || dim < 1) throw std::invalid_argument("CovState: bad dimensions");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("CovState: sigma2 must be > 0");
  qinv_.assign(static_cast<std::size_t>(aps),
               Eigen::MatrixXcd::Identity(dim, dim) / sigma2);
  logdet_.assign(static_cast<std::size_t>(aps), dim * std::log(sigma2));
  work_.resize(dim);
}

void CovState::rank1_update(int m, const Eigen::Ref<const Eigen::VectorXcd>& s, double c) {
  if (c == 0.0) return;
  auto& qinv = qinv_[static_cast<std::size_t>(m)];
  work_.noalias() = qinv * s;
  const double quad = s.dot(work_).real();  // s^H Qinv s, real for Hermitian Qinv
  const double denom = 1.0 + c * quad;
  // 1 + c*quad cancels to the noise floor when a dominant rank-one term is
  // removed in full; past that point the quotient form carries no digits
  if (!(denom > 1e-8 * (1.0 + std::fabs(c) * std::fabs(quad)))) {
    std::ostringstream msg;
    msg << "rank1_update: vanishing denominator " << denom << " at ap " << m
        << " (c=" << c << ", quad=" << quad << ")";
    throw CovarianceBreakdown(msg.str());
  }
  qinv.noalias() -= (c / denom) * (work_ * work_.adjoint());
  logdet_[static_cast<std::size_t>(m)] += std::log(denom);
}

void CovState::assign(int m, Eigen::MatrixXcd qinv, double logdet) {
  if (qinv.rows() != dim_ || qinv.cols() != dim_)
    throw std::invalid_argument("CovState::assign: wrong dimensions");
  qinv_[static_cast<std::size_t>(m)] = std::move(qinv);
  logdet_[static_cast<std::size_t>(m)] = logdet;
}

void CovState::rehermitize() {
  for (auto& qinv : qinv_) qinv = ((qinv + qinv.adjoint()) * 0.5).eval();
}

QuadForms quad_forms(const CovState& state, int m,
                     const Eigen::Ref<const Eigen::VectorXcd>& s, double beta_mk,
                     const Eigen::MatrixXcd& sample_cov) {
  const Eigen::VectorXcd u = state.qinv(m) * s;
  const std::complex<double> quad_a = s.dot(u);
  const std::complex<double> quad_b = u.dot(sample_cov * u);
  // both forms are real up to Hermitian drift; the imaginary residue is noise
  assert(std::fabs(quad_a.imag()) <= 1e-10 * (1.0 + std::fabs(quad_a.real())));
  assert(std::fabs(quad_b.imag()) <= 1e-10 * (1.0 + std::fabs(quad_b.real())));
  QuadForms q;
  q.a = beta_mk * quad_a.real();
  q.b = beta_mk * quad_b.real();
  return q;
}

double ml_cost(const CovState& state, std::span<const Eigen::MatrixXcd> sample_cov) {
  if (static_cast<int>(sample_cov.size()) != state.aps())
    throw std::invalid_argument("ml_cost: sample covariance count != M");
  double cost = 0.0;
  for (int m = 0; m < state.aps(); ++m) {
    // tr(A*B) for Hermitian A, B
    const double tr =
        state.qinv(m).cwiseProduct(sample_cov[static_cast<std::size_t>(m)].conjugate())
            .sum()
            .real();
    cost += state.logdet(m) + tr;
  }
  return cost;
}

double dominant_step(double a, double b, double gamma_k) {
  return std::max((b - a) / (a * a), -gamma_k);
}

Eigen::MatrixXcd assemble_covariance(const Eigen::MatrixXcd& signatures,
                                     const Eigen::Ref<const Eigen::VectorXd>& beta_row,
                                     const Eigen::Ref<const Eigen::VectorXd>& gamma,
                                     double sigma2) {
  const Eigen::Index dim = signatures.rows();
  const Eigen::Index k_users = signatures.cols();
  if (beta_row.size() != k_users || gamma.size() != k_users)
    throw std::invalid_argument("assemble_covariance: size mismatch");
  Eigen::MatrixXcd q = sigma2 * Eigen::MatrixXcd::Identity(dim, dim);
  for (Eigen::Index k = 0; k < k_users; ++k) {
    const double w = gamma[k] * beta_row[k];
    if (w != 0.0) q.noalias() += w * (signatures.col(k) * signatures.col(k).adjoint());
  }
  return q;
}

void refresh_state(CovState& state, int m, const Eigen::MatrixXcd& signatures,
                   const Eigen::Ref<const Eigen::VectorXd>& beta_row,
                   const Eigen::Ref<const Eigen::VectorXd>& gamma) {
  const Eigen::MatrixXcd q =
      assemble_covariance(signatures, beta_row, gamma, state.sigma2());
  const Eigen::LLT<Eigen::MatrixXcd> llt(q);
  if (llt.info() != Eigen::Success)
    throw CovarianceBreakdown("refresh_state: covariance not positive definite");
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < q.rows(); ++i)
    logdet += 2.0 * std::log(llt.matrixL()(i, i).real());
  Eigen::MatrixXcd qinv =
      llt.solve(Eigen::MatrixXcd::Identity(q.rows(), q.cols()));
  qinv = ((qinv + qinv.adjoint()) * 0.5).eval();
  state.assign(m, std::move(qinv), logdet);
}

double ml_cost_direct(const Eigen::MatrixXcd& signatures, const Eigen::MatrixXd& beta,
                      const Eigen::Ref<const Eigen::VectorXd>& gamma, double sigma2,
                      std::span<const Eigen::MatrixXcd> sample_cov) {
  const int m_aps = static_cast<int>(beta.rows());
  if (static_cast<int>(sample_cov.size()) != m_aps)
    throw std::invalid_argument("ml_cost_direct: sample covariance count != M");
  double cost = 0.0;
  for (int m = 0; m < m_aps; ++m) {
    const Eigen::MatrixXcd q =
        assemble_covariance(signatures, beta.row(m).transpose(), gamma, sigma2);
    const Eigen::LLT<Eigen::MatrixXcd> llt(q);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("ml_cost_direct: covariance not positive definite");
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < q.rows(); ++i)
      logdet += 2.0 * std::log(llt.matrixL()(i, i).real());
    const double tr = llt.solve(sample_cov[static_cast<std::size_t>(m)]).trace().real();
    cost += logdet + tr;
  }
  return cost;
}

}  // namespace cfad
