#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "cfad/detector.hpp"
#include "cfad/netmodel.hpp"

namespace cfad {

// Activity decisions from a gamma estimate. The scalar threshold is applied
// to gamma_k/rho_k, so one sweep parameter is meaningful under per-device
// power control.
struct Decisions {
  std::vector<std::uint8_t> flags;
  std::vector<int> active_set;
};
Decisions threshold_detect(const Eigen::VectorXd& gamma_hat, const Eigen::VectorXd& rho,
                           double threshold);

// Per-trial miss/false-alarm ratios. The miss term is absent when no device
// was active, the false-alarm term when all were.
struct TrialContrib {
  std::optional<double> pmd;
  std::optional<double> pfa;
};
TrialContrib pmd_pfa(const std::vector<int>& estimated, const std::vector<int>& truth,
                     int users);

// Everything a ROC sweep needs from one trial.
struct GammaRecord {
  Eigen::VectorXd gamma;
  Eigen::VectorXd rho;
  std::vector<int> active_set;
};

struct RocPoint {
  double threshold = 0.0;
  double pfa = 0.0;
  double pmd = 0.0;       // NaN when no trial contributed a miss term
  long md_trials = 0;     // trials contributing to pmd
  long fa_trials = 0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // ascending thresholds
  long n_trials = 0;
  SimParams sim;                 // provenance
  DetectorConfig det;
};

RocCurve roc_sweep(std::span<const GammaRecord> records,
                   const std::vector<double>& thresholds);

std::vector<double> log_threshold_grid(double lo = 1e-4, double hi = 10.0, int n = 60);

// Miss-detection probability at a target false-alarm level, linearly
// interpolated along the curve.
double pmd_at_pfa(const RocCurve& curve, double pfa);

// Empirical distribution of the dominant-AP SNR in dB.
struct EmpiricalCdf {
  std::vector<double> samples;  // ascending
  double quantile(double q) const;
  double cdf(double x) const;
};
EmpiricalCdf snr_cdf(const SimParams& params, int n_samples, std::uint64_t seed);

// Delimited text outputs (fixed column order for the plotting scripts).
void write_roc_csv(const RocCurve& curve, std::ostream& os);
void write_snr_cdf_csv(const EmpiricalCdf& cdf, std::ostream& os);

}  // namespace cfad
