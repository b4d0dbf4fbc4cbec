#include "cfad/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "cfad/rng.hpp"
#include "cfad/stats.hpp"

namespace cfad {

double SimParams::noise_w() const { return dbm_to_watts(noise_dbm); }

void SimParams::validate() const {
  if (aps < 1) throw std::invalid_argument("aps must be >= 1");
  if (antennas < 1) throw std::invalid_argument("antennas must be >= 1");
  if (users < 1) throw std::invalid_argument("users must be >= 1");
  if (seq_len < 1) throw std::invalid_argument("seq_len must be >= 1");
  if (activation_prob < 0.0 || activation_prob > 1.0)
    throw std::invalid_argument("activation_prob must be in [0,1]");
  if (!(area_side_m > 0.0)) throw std::invalid_argument("area_side_m must be > 0");
  if (shadow_var_db2 < 0.0) throw std::invalid_argument("shadow_var_db2 must be >= 0");
  if (!(noise_w() > 0.0)) throw std::invalid_argument("noise power must be > 0");
  if (!(max_power_w > 0.0)) throw std::invalid_argument("max_power_w must be > 0");
}

double torus_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& q, double side) {
  if (!(side > 0.0)) throw std::invalid_argument("torus side must be > 0");
  double acc = 0.0;
  for (int i = 0; i < 2; ++i) {
    double d = std::fabs(std::fmod(p[i] - q[i], side));
    if (d < 0.0) d += side;
    d = std::min(d, side - d);
    acc += d * d;
  }
  return std::sqrt(acc);
}

double path_loss_db(double d_m, double shadow_db, bool clamp) {
  if (clamp) {
    d_m = std::max(d_m, 1.0);
  } else if (d_m <= 0.0) {
    throw std::invalid_argument("path_loss_db: distance must be positive");
  }
  return -30.5 - 36.7 * std::log10(d_m) + shadow_db;
}

Eigen::MatrixXd large_scale_fading(const Eigen::Matrix2Xd& ap_pos,
                                   const Eigen::Matrix2Xd& user_pos, double side,
                                   const Eigen::MatrixXd& shadow_db) {
  const Eigen::Index m_aps = ap_pos.cols();
  const Eigen::Index k_users = user_pos.cols();
  if (shadow_db.rows() != m_aps || shadow_db.cols() != k_users)
    throw std::invalid_argument("shadow matrix shape mismatch");
  Eigen::MatrixXd beta(m_aps, k_users);
  for (Eigen::Index k = 0; k < k_users; ++k)
    for (Eigen::Index m = 0; m < m_aps; ++m) {
      const double d = torus_distance(ap_pos.col(m), user_pos.col(k), side);
      beta(m, k) = db_to_linear(path_loss_db(d, shadow_db(m, k)));
    }
  return beta;
}

Eigen::VectorXd assign_powers(const Eigen::MatrixXd& beta, const PowerPolicy& policy,
                              double max_power_w, double sigma2) {
  const Eigen::Index k_users = beta.cols();
  Eigen::VectorXd rho(k_users);
  if (policy.kind == PowerPolicy::Kind::full_power) {
    rho.setConstant(max_power_w);
    return rho;
  }
  if (!std::isfinite(policy.target_db))
    throw std::invalid_argument(
        "target-SNR policy has no resolved target; run calibrate_snr_target first");
  const double target = db_to_linear(policy.target_db);
  for (Eigen::Index k = 0; k < k_users; ++k) {
    const double beta_dom = beta.col(k).maxCoeff();
    const double wanted = target * sigma2 / beta_dom;
    if (wanted > max_power_w && policy.silence_in_outage) {
      rho[k] = 0.0;  // device cannot reach the target and is configured to stay silent
    } else {
      rho[k] = std::min(max_power_w, wanted);
    }
  }
  return rho;
}

namespace {

Eigen::Matrix2Xd uniform_positions(int n, double side, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, side);
  Eigen::Matrix2Xd pos(2, n);
  for (int i = 0; i < n; ++i) {
    // column-wise, x then y, so draw order is stable
    const double x = u(rng);
    const double y = u(rng);
    pos.col(i) << x, y;
  }
  return pos;
}

Eigen::MatrixXd shadow_matrix(Eigen::Index rows, Eigen::Index cols, double var_db2,
                              std::mt19937_64& rng) {
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(rows, cols);
  if (var_db2 > 0.0) {
    std::normal_distribution<double> n(0.0, std::sqrt(var_db2));
    for (Eigen::Index k = 0; k < cols; ++k)
      for (Eigen::Index m = 0; m < rows; ++m) f(m, k) = n(rng);
  }
  return f;
}

}  // namespace

Scenario generate_scenario(const SimParams& params, std::uint64_t seed) {
  params.validate();
  const int m_aps = params.effective_aps();
  const int k_users = params.users;
  const int seq_len = params.seq_len;

  Scenario scn;
  scn.sigma2 = params.noise_w();
  scn.antennas = params.effective_antennas();
  scn.area_side_m = params.area_side_m;

  auto rng_place = substream_rng(seed, Stream::placement);
  if (params.colocated) {
    scn.ap_pos.resize(2, 1);
    scn.ap_pos.col(0) << params.area_side_m / 2.0, params.area_side_m / 2.0;
  } else {
    scn.ap_pos = uniform_positions(m_aps, params.area_side_m, rng_place);
  }
  scn.user_pos = uniform_positions(k_users, params.area_side_m, rng_place);

  auto rng_shadow = substream_rng(seed, Stream::shadowing);
  const Eigen::MatrixXd shadow =
      shadow_matrix(m_aps, k_users, params.shadow_var_db2, rng_shadow);
  scn.beta = large_scale_fading(scn.ap_pos, scn.user_pos, params.area_side_m, shadow);

  auto rng_seq = substream_rng(seed, Stream::sequences);
  scn.signatures.resize(seq_len, k_users);
  for (int k = 0; k < k_users; ++k)
    for (int l = 0; l < seq_len; ++l) scn.signatures(l, k) = complex_gaussian(rng_seq);

  scn.rho = assign_powers(scn.beta, params.power, params.max_power_w, scn.sigma2);
  return scn;
}

std::vector<double> sample_dominant_snr_db(const SimParams& params, int n_samples,
                                           std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  SimParams p = params;
  p.power = PowerPolicy::full_power();
  // Signature draws are irrelevant here; keep sequences short.
  p.seq_len = 1;
  std::vector<double> snr_db;
  snr_db.reserve(static_cast<std::size_t>(n_samples));
  const double sigma2 = params.noise_w();
  std::uint64_t batch = 0;
  while (static_cast<int>(snr_db.size()) < n_samples) {
    const Scenario scn =
        generate_scenario(p, substream_seed(seed, Stream::calibration, batch++));
    for (int k = 0; k < scn.users() && static_cast<int>(snr_db.size()) < n_samples; ++k) {
      const double beta_dom = scn.beta.col(k).maxCoeff();
      snr_db.push_back(linear_to_db(params.max_power_w * beta_dom / sigma2));
    }
  }
  return snr_db;
}

double calibrate_snr_target(const SimParams& params, int n_samples, double quantile,
                            std::uint64_t seed) {
  if (n_samples < 1000) throw std::invalid_argument("calibration needs >= 1000 samples");
  std::vector<double> snr = sample_dominant_snr_db(params, n_samples, seed);
  std::sort(snr.begin(), snr.end());
  return empirical_quantile(snr, quantile);
}

ActivityDraw sample_activity(int users, double activation_prob, std::uint64_t seed) {
  if (activation_prob < 0.0 || activation_prob > 1.0)
    throw std::invalid_argument("activation_prob must be in [0,1]");
  auto rng = substream_rng(seed, Stream::activity);
  std::bernoulli_distribution coin(activation_prob);
  ActivityDraw draw;
  draw.flags.resize(static_cast<std::size_t>(users), 0);
  for (int k = 0; k < users; ++k) {
    if (coin(rng)) {
      draw.flags[static_cast<std::size_t>(k)] = 1;
      draw.active_set.push_back(k);
    }
  }
  return draw;
}

ReceivedBatch synthesize_received(const Scenario& scn,
                                  const std::vector<std::uint8_t>& activity,
                                  std::uint64_t seed, bool keep_raw) {
  const int k_users = scn.users();
  const int m_aps = scn.aps();
  const int seq_len = scn.seq_len();
  const int n_ant = scn.antennas;
  if (static_cast<int>(activity.size()) != k_users)
    throw std::invalid_argument("activity flag count != K");

  ReceivedBatch batch;
  batch.activity = activity;
  for (int k = 0; k < k_users; ++k)
    if (activity[static_cast<std::size_t>(k)]) batch.active_set.push_back(k);
  const auto& act = batch.active_set;

  // Only active columns enter Y_m = S D_a D_rho^(1/2) G_m + W_m.
  Eigen::MatrixXcd faded(seq_len, act.size());
  for (std::size_t j = 0; j < act.size(); ++j)
    faded.col(static_cast<Eigen::Index>(j)) =
        scn.signatures.col(act[j]) * std::sqrt(scn.rho[act[j]]);

  auto rng_chan = substream_rng(seed, Stream::channels);
  auto rng_noise = substream_rng(seed, Stream::noise);
  const double noise_scale = std::sqrt(scn.sigma2);

  batch.sample_cov.reserve(static_cast<std::size_t>(m_aps));
  if (keep_raw) batch.raw.reserve(static_cast<std::size_t>(m_aps));

  Eigen::MatrixXcd g(static_cast<Eigen::Index>(act.size()), n_ant);
  Eigen::MatrixXcd y(seq_len, n_ant);
  for (int m = 0; m < m_aps; ++m) {
    for (Eigen::Index n = 0; n < n_ant; ++n)
      for (std::size_t j = 0; j < act.size(); ++j)
        g(static_cast<Eigen::Index>(j), n) =
            std::sqrt(scn.beta(m, act[j])) * complex_gaussian(rng_chan);
    for (Eigen::Index n = 0; n < n_ant; ++n)
      for (Eigen::Index l = 0; l < seq_len; ++l)
        y(l, n) = noise_scale * complex_gaussian(rng_noise);
    if (!act.empty()) y.noalias() += faded * g;

    Eigen::MatrixXcd cov = (y * y.adjoint()) / static_cast<double>(n_ant);
    cov = ((cov + cov.adjoint()) * 0.5).eval();  // keep it exactly Hermitian
    batch.sample_cov.push_back(std::move(cov));
    if (keep_raw) batch.raw.push_back(y);
  }
  return batch;
}

ClusterMap build_clusters(const Eigen::MatrixXd& beta, int cluster_size) {
  const int m_aps = static_cast<int>(beta.rows());
  const int k_users = static_cast<int>(beta.cols());
  if (cluster_size < 1) throw std::invalid_argument("cluster size must be >= 1");
  const int t = std::min(cluster_size, m_aps);

  ClusterMap map;
  map.cluster_size = t;
  map.members.resize(static_cast<std::size_t>(k_users));
  std::vector<int> order(static_cast<std::size_t>(m_aps));
  for (int k = 0; k < k_users; ++k) {
    std::iota(order.begin(), order.end(), 0);
    // descending beta, ties to the lower AP index
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return beta(a, k) > beta(b, k); });
    map.members[static_cast<std::size_t>(k)].assign(order.begin(), order.begin() + t);
  }
  return map;
}

void export_scenario(const Scenario& scn, std::ostream& os) {
  os << "# scenario aps=" << scn.aps() << " users=" << scn.users()
     << " seq_len=" << scn.seq_len() << " antennas=" << scn.antennas
     << " area_side_m=" << scn.area_side_m
     << " noise_dbm=" << watts_to_dbm(scn.sigma2) << "\n";
  for (int m = 0; m < scn.aps(); ++m)
    os << "ap " << m << " " << scn.ap_pos(0, m) << " " << scn.ap_pos(1, m) << "\n";
  for (int k = 0; k < scn.users(); ++k)
    os << "user " << k << " " << scn.user_pos(0, k) << " " << scn.user_pos(1, k) << " "
       << (scn.rho[k] > 0.0 ? watts_to_dbm(scn.rho[k])
                            : -std::numeric_limits<double>::infinity())
       << "\n";
  for (int m = 0; m < scn.aps(); ++m)
    for (int k = 0; k < scn.users(); ++k)
      os << "beta " << m << " " << k << " " << linear_to_db(scn.beta(m, k)) << "\n";
}

void export_batch(const ReceivedBatch& batch, std::ostream& os) {
  os << "# batch users=" << batch.activity.size() << " aps=" << batch.sample_cov.size()
     << " active=" << batch.active_set.size() << " raw=" << (batch.has_raw() ? 1 : 0)
     << "\n";
  for (std::size_t k = 0; k < batch.activity.size(); ++k)
    os << "activity " << k << " " << static_cast<int>(batch.activity[k]) << "\n";
}

}  // namespace cfad
