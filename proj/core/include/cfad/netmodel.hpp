#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

namespace cfad {

// How per-device transmit powers are assigned.
struct PowerPolicy {
  enum class Kind { full_power, target_snr };
  Kind kind = Kind::target_snr;
  // SNR target (dB) at the dominant AP. NaN means "calibrate before use";
  // see calibrate_snr_target.
  double target_db = std::numeric_limits<double>::quiet_NaN();
  // Devices whose dominant-AP gain is too weak to reach the target are kept
  // transmitting at max power by default. Setting this silences them instead.
  bool silence_in_outage = false;

  static PowerPolicy full_power() { return {Kind::full_power, 0.0, false}; }
  static PowerPolicy target_snr(double db) { return {Kind::target_snr, db, false}; }
};

// Network-level simulation parameters.
struct SimParams {
  int aps = 20;              // M
  int antennas = 2;          // N per AP
  int users = 100;           // K
  int seq_len = 20;          // L, signature length in symbols
  double activation_prob = 0.1;
  double area_side_m = 2000.0;
  double shadow_var_db2 = 4.0;   // shadow fading variance (dB^2)
  double noise_dbm = -109.0;
  double max_power_w = 0.2;
  PowerPolicy power = {};
  // Co-located deployment: one site at the area center carrying all
  // aps*antennas antennas, same propagation law.
  bool colocated = false;

  double noise_w() const;
  int effective_aps() const { return colocated ? 1 : aps; }
  int effective_antennas() const { return colocated ? aps * antennas : antennas; }
  void validate() const;  // throws std::invalid_argument
};

// One static network realization.
struct Scenario {
  Eigen::Matrix2Xd ap_pos;      // 2 x M, meters
  Eigen::Matrix2Xd user_pos;    // 2 x K
  Eigen::MatrixXd beta;         // M x K large-scale fading, linear power gain
  Eigen::VectorXd rho;          // K transmit powers, watts
  Eigen::MatrixXcd signatures;  // L x K
  double sigma2 = 0.0;          // noise power, watts
  int antennas = 1;             // N per AP
  double area_side_m = 0.0;

  int aps() const { return static_cast<int>(beta.rows()); }
  int users() const { return static_cast<int>(beta.cols()); }
  int seq_len() const { return static_cast<int>(signatures.rows()); }
};

// One coherence-block realization as seen by the CPU.
struct ReceivedBatch {
  std::vector<std::uint8_t> activity;        // K flags
  std::vector<int> active_set;               // {k : activity[k] = 1}
  std::vector<Eigen::MatrixXcd> sample_cov;  // M of LxL, Hermitian PSD
  std::vector<Eigen::MatrixXcd> raw;         // M of LxN when kept, else empty

  bool has_raw() const { return !raw.empty(); }
};

// Per-user list of its strongest APs, strongest first.
struct ClusterMap {
  int cluster_size = 1;                    // T
  std::vector<std::vector<int>> members;   // K lists of min(T, M) AP indices

  int dominant(int k) const { return members[static_cast<std::size_t>(k)].front(); }
};

// Euclidean distance on the 2-D torus of the given side length. Coordinates
// are reduced modulo the side first; per axis the shorter way around is used.
double torus_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& q, double side);

// Micro-cell path loss -30.5 - 36.7*log10(d/1m) plus a shadow realization in
// dB. Distances are clamped to >= 1 m unless clamping is disabled, in which
// case d <= 0 throws.
double path_loss_db(double d_m, double shadow_db, bool clamp = true);

// M x K matrix of linear large-scale fading coefficients from positions and a
// per-link shadow realization (dB).
Eigen::MatrixXd large_scale_fading(const Eigen::Matrix2Xd& ap_pos,
                                   const Eigen::Matrix2Xd& user_pos,
                                   double side,
                                   const Eigen::MatrixXd& shadow_db);

Eigen::VectorXd assign_powers(const Eigen::MatrixXd& beta, const PowerPolicy& policy,
                              double max_power_w, double sigma2);

// Full-power SNR (dB) at the dominant AP for independently placed users in
// fresh network realizations. Shared sampling core of calibrate_snr_target
// and the SNR CDF study.
std::vector<double> sample_dominant_snr_db(const SimParams& params, int n_samples,
                                           std::uint64_t seed);

// Empirical `quantile` of the full-power dominant-AP SNR; with the default
// 0.05, the target a fraction 1-0.05 of devices can reach.
double calibrate_snr_target(const SimParams& params, int n_samples,
                            double quantile, std::uint64_t seed);

Scenario generate_scenario(const SimParams& params, std::uint64_t seed);

struct ActivityDraw {
  std::vector<std::uint8_t> flags;
  std::vector<int> active_set;
};
ActivityDraw sample_activity(int users, double activation_prob, std::uint64_t seed);

ReceivedBatch synthesize_received(const Scenario& scn,
                                  const std::vector<std::uint8_t>& activity,
                                  std::uint64_t seed, bool keep_raw);

// T strongest APs per user by descending beta; ties go to the lower AP index.
ClusterMap build_clusters(const Eigen::MatrixXd& beta, int cluster_size);

// Debug text dumps (one record per AP/user; beta in dB, rho in dBm).
void export_scenario(const Scenario& scn, std::ostream& os);
void export_batch(const ReceivedBatch& batch, std::ostream& os);

}  // namespace cfad
