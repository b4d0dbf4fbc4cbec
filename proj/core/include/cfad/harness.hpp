#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cfad/detector.hpp"
#include "cfad/fronthaul.hpp"
#include "cfad/metrics.hpp"
#include "cfad/netmodel.hpp"

namespace cfad {

struct FronthaulSpec {
  bool enabled = false;
  MinifloatFormat format;
  std::optional<PayloadMode> mode;  // empty: pick by L vs N
};

// Full description of one Monte-Carlo experiment. Outputs are a pure
// function of this struct on a fixed platform, regardless of worker count.
struct ExperimentSpec {
  SimParams sim;
  DetectorConfig det;
  FronthaulSpec fronthaul;
  int n_trials = 500;
  std::uint64_t root_seed = 1;
  std::vector<double> thresholds = log_threshold_grid();
  std::string output_dir = "out";
  int workers = 0;          // 0: hardware concurrency
  bool keep_traces = false; // retain per-iteration cost traces per trial
  int calibration_samples = 10000;
  std::string preset_name;  // provenance, empty for hand-written specs
  std::string scale;

  void validate() const;
};

struct TrialRecord {
  long trial_id = 0;
  Eigen::VectorXd gamma;
  Eigen::VectorXd rho;
  std::vector<int> active_set;
  int iterations_run = 0;
  double final_cost = 0.0;
  bool excluded = false;            // detector abort; gamma empty
  std::vector<double> cost_trace;   // only when keep_traces
  std::vector<int> support_trace;
  // worst per-sweep deviation between incremental and recomputed cost;
  // NaN unless the detector ran with cost_audit
  double audit_max_rel_err = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentResult {
  RocCurve roc;
  std::vector<TrialRecord> records;
  int excluded_trials = 0;
  // Target actually used when the power policy was auto-calibrated.
  double resolved_target_db = std::numeric_limits<double>::quiet_NaN();
};

ExperimentResult run_experiment(const ExperimentSpec& spec);

// Published-figure parameterizations at "paper" or "desk" scale. Names:
// fig2-snr, fig3-roc, fig4-roc, fig5-cluster, fig6-convergence, fig7-eps,
// fig8-parallel, fig9-fronthaul.
ExperimentSpec preset(const std::string& name, const std::string& scale);
std::vector<std::string> preset_names();

// Dotted-key override, e.g. "sim.users=400" or "run.trials=1000".
void apply_override(ExperimentSpec& spec, const std::string& key, const std::string& value);

// INI-style spec file; unspecified fields keep the desk-preset defaults.
ExperimentSpec load_spec(const std::string& path);
ExperimentSpec parse_spec(std::istream& is);

// Writes roc.csv, trials.csv, records.csv, manifest.json and (when traces
// were kept) cost_trace.csv into dir.
void emit_outputs(const ExperimentResult& result, const ExperimentSpec& spec,
                  const std::string& dir);

// Reads a records.csv archive back for threshold re-sweeps.
std::vector<GammaRecord> load_records_csv(const std::string& path);

// Parses "log:lo:hi:n" or a comma-separated explicit list.
std::vector<double> parse_threshold_grid(const std::string& text);

}  // namespace cfad
