#include "cfad/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "cfad/polyroot.hpp"
#include "cfad/rng.hpp"

namespace cfad {

void DetectorConfig::validate(int aps, int users) const {
  if (cluster_size < 1 || cluster_size > aps)
    throw std::invalid_argument("cluster_size must be in [1, M]");
  if (groups < 1 || groups > users)
    throw std::invalid_argument("groups must be in [1, K]");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
}

namespace {

int support_size(const Eigen::VectorXd& gamma) {
  int n = 0;
  for (Eigen::Index k = 0; k < gamma.size(); ++k)
    if (gamma[k] > 1e-12) ++n;
  return n;
}

// The soft step for user k is propagated to every AP's covariance state.
// `gamma` already contains the step, so a cancellation-limited removal can be
// recovered by rebuilding that AP's state at the current iterate.
void propagate(CovState& state, const Scenario& scn,
               const Eigen::Ref<const Eigen::VectorXd>& gamma, int k, double delta) {
  const double skip = 1e-18 * scn.sigma2;
  const auto s = scn.signatures.col(k);
  for (int m = 0; m < scn.aps(); ++m) {
    const double c = delta * scn.beta(m, k);
    if (std::fabs(c) <= skip) continue;
    try {
      state.rank1_update(m, s, c);
    } catch (const CovarianceBreakdown&) {
      refresh_state(state, m, scn.signatures, scn.beta.row(m).transpose(), gamma);
    }
  }
}

void sweep_sequential(CovState& state, Eigen::VectorXd& gamma, const Scenario& scn,
                      const ReceivedBatch& batch, const ClusterMap& clusters,
                      const DetectorConfig& cfg, std::span<const int> order) {
  const bool single_ap = cfg.algorithm == Algorithm::dominant_ap;
  std::vector<double> a(static_cast<std::size_t>(clusters.cluster_size));
  std::vector<double> b(a.size());
  for (int k : order) {
    const auto& cluster = clusters.members[static_cast<std::size_t>(k)];
    double delta = 0.0;
    if (single_ap) {
      const int m = cluster.front();
      const QuadForms q = quad_forms(state, m, scn.signatures.col(k), scn.beta(m, k),
                                     batch.sample_cov[static_cast<std::size_t>(m)]);
      delta = dominant_step(q.a, q.b, gamma[k]);
    } else {
      for (std::size_t i = 0; i < cluster.size(); ++i) {
        const int m = cluster[i];
        const QuadForms q = quad_forms(state, m, scn.signatures.col(k), scn.beta(m, k),
                                       batch.sample_cov[static_cast<std::size_t>(m)]);
        a[i] = q.a;
        b[i] = q.b;
      }
      delta = cluster_step(a, b, gamma[k]);
    }
    if (delta == 0.0) continue;
    gamma[k] = std::max(gamma[k] + delta, 0.0);
    propagate(state, scn, gamma, k, delta);
  }
}

void sweep_grouped(CovState& state, Eigen::VectorXd& gamma, const Scenario& scn,
                   const ReceivedBatch& batch, const ClusterMap& clusters,
                   const DetectorConfig& cfg, std::span<const int> order) {
  const int k_users = static_cast<int>(order.size());
  const int n_groups = std::min(cfg.groups, k_users);
  const int base = k_users / n_groups;
  const int extra = k_users % n_groups;  // first `extra` groups get one more

  const std::size_t t = static_cast<std::size_t>(clusters.cluster_size);
  std::vector<double> a(t), b(t), deltas;

  int start = 0;
  for (int g = 0; g < n_groups; ++g) {
    const int len = base + (g < extra ? 1 : 0);
    const auto group = order.subspan(static_cast<std::size_t>(start),
                                     static_cast<std::size_t>(len));
    start += len;

    // All quadratic forms of the group come from the group-start state; the
    // steps are then independent and could be solved in parallel.
    deltas.clear();
    for (int k : group) {
      const auto& cluster = clusters.members[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < cluster.size(); ++i) {
        const int m = cluster[i];
        const QuadForms q = quad_forms(state, m, scn.signatures.col(k), scn.beta(m, k),
                                       batch.sample_cov[static_cast<std::size_t>(m)]);
        a[i] = q.a;
        b[i] = q.b;
      }
      deltas.push_back(cluster_step(a, b, gamma[k]));
    }

    // Apply sequentially in permuted order.
    for (std::size_t j = 0; j < group.size(); ++j) {
      const int k = group[j];
      const double delta = deltas[j];
      if (delta == 0.0) continue;
      gamma[k] = std::max(gamma[k] + delta, 0.0);
      propagate(state, scn, gamma, k, delta);
    }
  }
}

}  // namespace

GammaEstimate detect(const Scenario& scn, const ReceivedBatch& batch,
                     const ClusterMap& clusters, const DetectorConfig& cfg) {
  const int m_aps = scn.aps();
  const int k_users = scn.users();
  cfg.validate(m_aps, k_users);
  if (static_cast<int>(batch.sample_cov.size()) != m_aps)
    throw std::invalid_argument("detect: sample covariance count != M");
  if (static_cast<int>(clusters.members.size()) != k_users)
    throw std::invalid_argument("detect: cluster map size != K");
  const bool clustered = cfg.algorithm != Algorithm::dominant_ap;
  if (clustered && clusters.cluster_size != std::min(cfg.cluster_size, m_aps))
    throw std::invalid_argument("detect: cluster map was built for a different T");

  CovState state(m_aps, scn.seq_len(), scn.sigma2);
  const std::span<const Eigen::MatrixXcd> qy{batch.sample_cov};

  GammaEstimate est;
  est.gamma = Eigen::VectorXd::Zero(k_users);
  Eigen::VectorXd prev_gamma = est.gamma;
  double prev_cost = ml_cost(state, qy);
  est.cost_trace = {prev_cost};
  est.support_trace = {0};
  double audit_worst = 0.0;

  auto rng = substream_rng(cfg.perm_seed, Stream::permutation);
  std::vector<int> order(static_cast<std::size_t>(k_users));
  std::iota(order.begin(), order.end(), 0);

  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    std::shuffle(order.begin(), order.end(), rng);
    if (cfg.algorithm == Algorithm::cluster_parallel)
      sweep_grouped(state, est.gamma, scn, batch, clusters, cfg, order);
    else
      sweep_sequential(state, est.gamma, scn, batch, clusters, cfg, order);
    state.rehermitize();
    est.iterations_run = iter;

    const double cost = ml_cost(state, qy);
    if (cfg.cost_audit) {
      const double direct =
          ml_cost_direct(scn.signatures, scn.beta, est.gamma, scn.sigma2, qy);
      audit_worst = std::max(audit_worst,
                             std::fabs(cost - direct) / std::max(1.0, std::fabs(direct)));
    }
    if (cost >= prev_cost) {
      est.gamma = prev_gamma;  // keep the last improving iterate
      break;
    }
    prev_cost = cost;
    prev_gamma = est.gamma;
    est.cost_trace.push_back(cost);
    est.support_trace.push_back(support_size(est.gamma));
  }
  if (cfg.cost_audit) est.audit_max_rel_err = audit_worst;
  return est;
}

GammaEstimate run_reference_bruteforce(const Scenario& scn, const ReceivedBatch& batch,
                                       const std::vector<double>& rho_multipliers) {
  const int k_users = scn.users();
  const int m_aps = scn.aps();
  if (k_users > 6 || m_aps > 2)
    throw std::invalid_argument("run_reference_bruteforce: instance too large (K <= 6, M <= 2)");
  if (rho_multipliers.empty())
    throw std::invalid_argument("run_reference_bruteforce: empty grid");
  if (static_cast<int>(batch.sample_cov.size()) != m_aps)
    throw std::invalid_argument("run_reference_bruteforce: sample covariance count != M");

  const std::span<const Eigen::MatrixXcd> qy{batch.sample_cov};
  const int n_values = static_cast<int>(rho_multipliers.size());
  std::vector<int> digit(static_cast<std::size_t>(k_users), 0);
  Eigen::VectorXd gamma(k_users), best_gamma = Eigen::VectorXd::Zero(k_users);
  double best_cost = std::numeric_limits<double>::infinity();

  bool done = false;
  while (!done) {
    for (int k = 0; k < k_users; ++k)
      gamma[k] = rho_multipliers[static_cast<std::size_t>(digit[static_cast<std::size_t>(k)])] *
                 scn.rho[k];
    const double cost = ml_cost_direct(scn.signatures, scn.beta, gamma, scn.sigma2, qy);
    if (cost < best_cost) {
      best_cost = cost;
      best_gamma = gamma;
    }
    // odometer
    done = true;
    for (int k = 0; k < k_users; ++k) {
      auto& d = digit[static_cast<std::size_t>(k)];
      if (++d < n_values) {
        done = false;
        break;
      }
      d = 0;
    }
  }

  GammaEstimate est;
  est.gamma = best_gamma;
  est.cost_trace = {best_cost};
  est.support_trace = {support_size(best_gamma)};
  est.iterations_run = 0;
  return est;
}

}  // namespace cfad
