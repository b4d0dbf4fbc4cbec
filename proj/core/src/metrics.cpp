#include "cfad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "cfad/stats.hpp"

namespace cfad {

Decisions threshold_detect(const Eigen::VectorXd& gamma_hat, const Eigen::VectorXd& rho,
                           double threshold) {
  if (gamma_hat.size() != rho.size())
    throw std::invalid_argument("threshold_detect: size mismatch");
  if (!(threshold >= 0.0)) throw std::invalid_argument("threshold must be >= 0");
  Decisions dec;
  dec.flags.resize(static_cast<std::size_t>(gamma_hat.size()), 0);
  for (Eigen::Index k = 0; k < gamma_hat.size(); ++k) {
    // per-device threshold th*rho_k; rho_k = 0 (silenced device) never fires
    const bool active = rho[k] > 0.0 && gamma_hat[k] >= threshold * rho[k];
    if (active) {
      dec.flags[static_cast<std::size_t>(k)] = 1;
      dec.active_set.push_back(static_cast<int>(k));
    }
  }
  return dec;
}

TrialContrib pmd_pfa(const std::vector<int>& estimated, const std::vector<int>& truth,
                     int users) {
  TrialContrib out;
  const auto n_active = static_cast<long>(truth.size());
  long hits = 0;
  long false_alarms = 0;
  // both sets are ascending index lists
  std::size_t i = 0;
  for (int k : estimated) {
    while (i < truth.size() && truth[i] < k) ++i;
    if (i < truth.size() && truth[i] == k)
      ++hits;
    else
      ++false_alarms;
  }
  if (n_active > 0)
    out.pmd = 1.0 - static_cast<double>(hits) / static_cast<double>(n_active);
  if (n_active < users)
    out.pfa = static_cast<double>(false_alarms) / static_cast<double>(users - n_active);
  return out;
}

RocCurve roc_sweep(std::span<const GammaRecord> records,
                   const std::vector<double>& thresholds) {
  if (records.empty()) throw std::invalid_argument("roc_sweep: no trials");
  if (!std::is_sorted(thresholds.begin(), thresholds.end()))
    throw std::invalid_argument("roc_sweep: thresholds must be ascending");

  RocCurve curve;
  curve.n_trials = static_cast<long>(records.size());
  curve.points.reserve(thresholds.size());
  for (double th : thresholds) {
    RocPoint pt;
    pt.threshold = th;
    double pmd_sum = 0.0, pfa_sum = 0.0;
    for (const auto& rec : records) {
      const int users = static_cast<int>(rec.gamma.size());
      const Decisions dec = threshold_detect(rec.gamma, rec.rho, th);
      const TrialContrib c = pmd_pfa(dec.active_set, rec.active_set, users);
      if (c.pmd) {
        pmd_sum += *c.pmd;
        ++pt.md_trials;
      }
      if (c.pfa) {
        pfa_sum += *c.pfa;
        ++pt.fa_trials;
      }
    }
    pt.pmd = pt.md_trials > 0 ? pmd_sum / static_cast<double>(pt.md_trials)
                              : std::numeric_limits<double>::quiet_NaN();
    pt.pfa = pt.fa_trials > 0 ? pfa_sum / static_cast<double>(pt.fa_trials)
                              : std::numeric_limits<double>::quiet_NaN();
    curve.points.push_back(pt);
  }
  return curve;
}

std::vector<double> log_threshold_grid(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2)
    throw std::invalid_argument("log_threshold_grid: need 0 < lo < hi, n >= 2");
  std::vector<double> grid(static_cast<std::size_t>(n));
  const double step = (std::log10(hi) - std::log10(lo)) / (n - 1);
  for (int i = 0; i < n; ++i)
    grid[static_cast<std::size_t>(i)] = std::pow(10.0, std::log10(lo) + step * i);
  return grid;
}

double pmd_at_pfa(const RocCurve& curve, double pfa) {
  // Walk the curve in order of decreasing pfa (increasing threshold) and
  // interpolate pmd at the requested false-alarm level.
  struct Node {
    double pfa, pmd;
  };
  std::vector<Node> nodes;
  for (const auto& pt : curve.points)
    if (std::isfinite(pt.pfa) && std::isfinite(pt.pmd)) nodes.push_back({pt.pfa, pt.pmd});
  if (nodes.empty()) throw std::invalid_argument("pmd_at_pfa: empty curve");
  std::sort(nodes.begin(), nodes.end(),
            [](const Node& x, const Node& y) { return x.pfa < y.pfa; });
  if (pfa <= nodes.front().pfa) return nodes.front().pmd;
  if (pfa >= nodes.back().pfa) return nodes.back().pmd;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (nodes[i].pfa >= pfa) {
      const double span = nodes[i].pfa - nodes[i - 1].pfa;
      if (span <= 0.0) return nodes[i].pmd;
      const double w = (pfa - nodes[i - 1].pfa) / span;
      return nodes[i - 1].pmd + w * (nodes[i].pmd - nodes[i - 1].pmd);
    }
  }
  return nodes.back().pmd;
}

double EmpiricalCdf::quantile(double q) const { return empirical_quantile(samples, q); }

double EmpiricalCdf::cdf(double x) const {
  const auto it = std::upper_bound(samples.begin(), samples.end(), x);
  return static_cast<double>(it - samples.begin()) / static_cast<double>(samples.size());
}

EmpiricalCdf snr_cdf(const SimParams& params, int n_samples, std::uint64_t seed) {
  if (n_samples < 1000) throw std::invalid_argument("snr_cdf: need >= 1000 samples");
  EmpiricalCdf cdf;
  cdf.samples = sample_dominant_snr_db(params, n_samples, seed);
  std::sort(cdf.samples.begin(), cdf.samples.end());
  return cdf;
}

namespace {
void write_double(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  os << buf;
}
}  // namespace

void write_roc_csv(const RocCurve& curve, std::ostream& os) {
  os << "threshold,pfa,pmd\n";
  for (const auto& pt : curve.points) {
    write_double(os, pt.threshold);
    os << ",";
    write_double(os, pt.pfa);
    os << ",";
    write_double(os, pt.pmd);
    os << "\n";
  }
}

void write_snr_cdf_csv(const EmpiricalCdf& cdf, std::ostream& os) {
  os << "snr_db,cdf\n";
  const auto n = static_cast<double>(cdf.samples.size());
  for (std::size_t i = 0; i < cdf.samples.size(); ++i) {
    write_double(os, cdf.samples[i]);
    os << ",";
    write_double(os, static_cast<double>(i + 1) / n);
    os << "\n";
  }
}

}  // namespace cfad
