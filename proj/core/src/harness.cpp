#include "cfad/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "cfad/rng.hpp"
#include "cfad/stats.hpp"

namespace cfad {

namespace {

constexpr const char* kVersion = "0.1.0";

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool parse_bool(const std::string& v) {
  std::string s;
  for (char c : v) s.push_back(static_cast<char>(std::tolower(c)));
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw std::invalid_argument("not a boolean: " + v);
}

Algorithm parse_algorithm(const std::string& v) {
  if (v == "dominant_ap" || v == "dominant-ap") return Algorithm::dominant_ap;
  if (v == "cluster") return Algorithm::cluster;
  if (v == "cluster_parallel" || v == "cluster-parallel")
    return Algorithm::cluster_parallel;
  throw std::invalid_argument("unknown algorithm: " + v);
}

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::dominant_ap: return "dominant_ap";
    case Algorithm::cluster: return "cluster";
    case Algorithm::cluster_parallel: return "cluster_parallel";
  }
  return "?";
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::uint64_t trial_seed(const ExperimentSpec& spec, int t) {
  return substream_seed(spec.root_seed, Stream::trial, static_cast<std::uint64_t>(t));
}

}  // namespace

void ExperimentSpec::validate() const {
  sim.validate();
  if (n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");
  if (thresholds.empty() || !std::is_sorted(thresholds.begin(), thresholds.end()))
    throw std::invalid_argument("thresholds must be a non-empty ascending grid");
  if (workers < 0) throw std::invalid_argument("workers must be >= 0");
  if (calibration_samples < 1000)
    throw std::invalid_argument("calibration_samples must be >= 1000");
  if (fronthaul.enabled) fronthaul.format.validate();
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();

  SimParams sim = spec.sim;
  ExperimentResult result;
  if (sim.power.kind == PowerPolicy::Kind::target_snr &&
      !std::isfinite(sim.power.target_db)) {
    result.resolved_target_db =
        calibrate_snr_target(sim, spec.calibration_samples, 0.05,
                             substream_seed(spec.root_seed, Stream::calibration));
    sim.power.target_db = result.resolved_target_db;
  }

  DetectorConfig det = spec.det;
  if (det.algorithm == Algorithm::dominant_ap) det.cluster_size = 1;
  det.cluster_size = std::min(det.cluster_size, sim.effective_aps());
  det.groups = std::min(det.groups, sim.users);
  det.validate(sim.effective_aps(), sim.users);

  const PayloadMode payload_mode =
      spec.fronthaul.mode ? *spec.fronthaul.mode
                          : default_payload_mode(sim.seq_len, sim.effective_antennas());
  const bool keep_raw =
      spec.fronthaul.enabled && payload_mode == PayloadMode::raw_signals;

  result.records.resize(static_cast<std::size_t>(spec.n_trials));
  std::atomic<int> next{0};
  std::atomic<int> excluded{0};
  std::mutex log_mutex;
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto run_trial = [&](int t) {
    const std::uint64_t seed = trial_seed(spec, t);
    const Scenario scn = generate_scenario(sim, seed);
    const ActivityDraw draw = sample_activity(sim.users, sim.activation_prob, seed);
    ReceivedBatch batch = synthesize_received(scn, draw.flags, seed, keep_raw);
    if (spec.fronthaul.enabled)
      batch = quantize_payload(batch, spec.fronthaul.format, payload_mode);
    const ClusterMap clusters = build_clusters(scn.beta, det.cluster_size);

    DetectorConfig trial_det = det;
    trial_det.perm_seed = substream_seed(seed, Stream::permutation);

    TrialRecord& rec = result.records[static_cast<std::size_t>(t)];
    rec.trial_id = t;
    rec.rho = scn.rho;
    rec.active_set = draw.active_set;
    try {
      GammaEstimate est = detect(scn, batch, clusters, trial_det);
      rec.gamma = std::move(est.gamma);
      rec.iterations_run = est.iterations_run;
      rec.final_cost = est.cost_trace.back();
      rec.audit_max_rel_err = est.audit_max_rel_err;
      if (spec.keep_traces) {
        rec.cost_trace = std::move(est.cost_trace);
        rec.support_trace = std::move(est.support_trace);
      }
    } catch (const CovarianceBreakdown& e) {
      rec.excluded = true;
      excluded.fetch_add(1);
      std::lock_guard<std::mutex> lock(log_mutex);
      std::cerr << "trial " << t << " excluded: " << e.what() << "\n";
    }
  };

  auto worker = [&] {
    for (int t; (t = next.fetch_add(1)) < spec.n_trials;) {
      try {
        run_trial(t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  int n_workers = spec.workers > 0
                      ? spec.workers
                      : std::max(1u, std::thread::hardware_concurrency());
  n_workers = std::min(n_workers, spec.n_trials);
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  result.excluded_trials = excluded.load();

  std::vector<GammaRecord> usable;
  usable.reserve(result.records.size());
  for (const auto& rec : result.records)
    if (!rec.excluded) usable.push_back({rec.gamma, rec.rho, rec.active_set});
  if (!usable.empty()) {
    result.roc = roc_sweep(usable, spec.thresholds);
  } else {
    result.roc.n_trials = 0;
  }
  result.roc.sim = spec.sim;
  result.roc.det = det;
  return result;
}

namespace {

ExperimentSpec desk_base() {
  ExperimentSpec spec;
  spec.sim.aps = 20;
  spec.sim.antennas = 2;
  spec.sim.users = 100;
  spec.sim.seq_len = 20;
  spec.sim.activation_prob = 0.1;
  spec.sim.area_side_m = 2000.0;
  spec.sim.shadow_var_db2 = 4.0;
  spec.sim.noise_dbm = -109.0;
  spec.sim.max_power_w = 0.2;
  spec.sim.power = {};  // target SNR, auto-calibrated
  spec.det.algorithm = Algorithm::cluster;
  spec.det.cluster_size = 2;
  spec.det.groups = 1;
  spec.det.max_iterations = 10;
  spec.n_trials = 500;
  spec.root_seed = 1;
  spec.calibration_samples = 10000;
  return spec;
}

ExperimentSpec paper_base() {
  ExperimentSpec spec = desk_base();
  spec.sim.users = 400;
  spec.sim.seq_len = 40;
  spec.n_trials = 100000;
  spec.calibration_samples = 100000;
  return spec;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"fig2-snr",  "fig3-roc",        "fig4-roc", "fig5-cluster",
          "fig6-convergence", "fig7-eps", "fig8-parallel", "fig9-fronthaul"};
}

ExperimentSpec preset(const std::string& name, const std::string& scale) {
  bool paper;
  if (scale == "paper")
    paper = true;
  else if (scale == "desk")
    paper = false;
  else
    throw std::invalid_argument("unknown scale (use paper or desk): " + scale);

  ExperimentSpec spec = paper ? paper_base() : desk_base();
  spec.preset_name = name;
  spec.scale = scale;

  if (name == "fig2-snr") {
    // SNR coverage study: full-power devices, dense cell-free deployment
    spec.sim.aps = 100;
    spec.sim.antennas = 1;
    spec.sim.power = PowerPolicy::full_power();
    spec.det.algorithm = Algorithm::dominant_ap;
    spec.det.cluster_size = 1;
    spec.n_trials = paper ? 100000 : 10000;
  } else if (name == "fig3-roc") {
    spec.det.algorithm = Algorithm::dominant_ap;
    spec.det.cluster_size = 1;
  } else if (name == "fig4-roc") {
    spec.det.algorithm = Algorithm::dominant_ap;
    spec.det.cluster_size = 1;
    spec.sim.area_side_m = 1000.0;
  } else if (name == "fig5-cluster") {
    spec.det.algorithm = Algorithm::cluster;
    spec.det.cluster_size = 2;
  } else if (name == "fig6-convergence") {
    spec.det.algorithm = Algorithm::cluster;
    spec.det.cluster_size = 2;
    spec.det.cost_audit = true;
    spec.keep_traces = true;
    spec.n_trials = paper ? 1000 : 50;
  } else if (name == "fig7-eps") {
    spec.det.algorithm = Algorithm::cluster;
    spec.det.cluster_size = 2;
    // overload point: K*eps above the sequence length
    spec.sim.activation_prob = paper ? 0.15 : 0.25;
  } else if (name == "fig8-parallel") {
    spec.det.algorithm = Algorithm::cluster_parallel;
    spec.det.cluster_size = 2;
    spec.det.groups = spec.sim.users / 10;
  } else if (name == "fig9-fronthaul") {
    spec.det.algorithm = Algorithm::cluster;
    spec.det.cluster_size = 2;
    spec.fronthaul.enabled = true;
    spec.fronthaul.format = MinifloatFormat::with_default_mantissa(20);
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  return spec;
}

void apply_override(ExperimentSpec& spec, const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  auto num = [&] { return std::stod(v); };
  auto integer = [&] { return std::stoi(v); };

  if (key == "sim.aps") spec.sim.aps = integer();
  else if (key == "sim.antennas") spec.sim.antennas = integer();
  else if (key == "sim.users") spec.sim.users = integer();
  else if (key == "sim.seq_len" || key == "sim.sequence_length") spec.sim.seq_len = integer();
  else if (key == "sim.activation_prob") spec.sim.activation_prob = num();
  else if (key == "sim.area_side_m") spec.sim.area_side_m = num();
  else if (key == "sim.shadow_var_db2") spec.sim.shadow_var_db2 = num();
  else if (key == "sim.noise_dbm") spec.sim.noise_dbm = num();
  else if (key == "sim.max_power_w") spec.sim.max_power_w = num();
  else if (key == "sim.colocated") spec.sim.colocated = parse_bool(v);
  else if (key == "sim.power_policy") {
    if (v == "full_power") spec.sim.power.kind = PowerPolicy::Kind::full_power;
    else if (v == "target_snr") spec.sim.power.kind = PowerPolicy::Kind::target_snr;
    else throw std::invalid_argument("unknown power policy: " + v);
  } else if (key == "sim.target_snr_db") {
    spec.sim.power.target_db =
        (v == "auto") ? std::numeric_limits<double>::quiet_NaN() : num();
  } else if (key == "sim.silence_in_outage") {
    spec.sim.power.silence_in_outage = parse_bool(v);
  } else if (key == "detector.algorithm") {
    spec.det.algorithm = parse_algorithm(v);
  } else if (key == "detector.cluster_size") spec.det.cluster_size = integer();
  else if (key == "detector.groups") spec.det.groups = integer();
  else if (key == "detector.max_iterations") spec.det.max_iterations = integer();
  else if (key == "detector.cost_audit") spec.det.cost_audit = parse_bool(v);
  else if (key == "fronthaul.enabled") spec.fronthaul.enabled = parse_bool(v);
  else if (key == "fronthaul.bits") {
    spec.fronthaul.format =
        MinifloatFormat::with_default_mantissa(integer());
  } else if (key == "fronthaul.mantissa_bits") {
    spec.fronthaul.format.mantissa_bits = integer();
  } else if (key == "fronthaul.mode") {
    if (v == "auto") spec.fronthaul.mode.reset();
    else if (v == "raw") spec.fronthaul.mode = PayloadMode::raw_signals;
    else if (v == "cov") spec.fronthaul.mode = PayloadMode::sample_cov;
    else throw std::invalid_argument("unknown fronthaul mode: " + v);
  } else if (key == "run.trials") spec.n_trials = integer();
  else if (key == "run.seed") spec.root_seed = std::stoull(v);
  else if (key == "run.thresholds") spec.thresholds = parse_threshold_grid(v);
  else if (key == "run.output_dir") spec.output_dir = v;
  else if (key == "run.workers") spec.workers = integer();
  else if (key == "run.keep_traces") spec.keep_traces = parse_bool(v);
  else if (key == "run.calibration_samples") spec.calibration_samples = integer();
  else throw std::invalid_argument("unknown spec key: " + key);
}

ExperimentSpec parse_spec(std::istream& is) {
  ExperimentSpec spec = desk_base();
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("spec file line " + std::to_string(lineno) +
                                  ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    try {
      apply_override(spec, full, value);
    } catch (const std::exception& e) {
      throw std::invalid_argument("spec file line " + std::to_string(lineno) + ": " +
                                  e.what());
    }
  }
  return spec;
}

ExperimentSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open spec file: " + path);
  return parse_spec(in);
}

std::vector<double> parse_threshold_grid(const std::string& text) {
  if (text.rfind("log:", 0) == 0) {
    double lo = 0.0, hi = 0.0;
    int n = 0;
    if (std::sscanf(text.c_str(), "log:%lf:%lf:%d", &lo, &hi, &n) != 3)
      throw std::invalid_argument("bad grid spec (want log:lo:hi:n): " + text);
    return log_threshold_grid(lo, hi, n);
  }
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) grid.push_back(std::stod(item));
  }
  if (grid.empty() || !std::is_sorted(grid.begin(), grid.end()))
    throw std::invalid_argument("thresholds must be non-empty and ascending: " + text);
  return grid;
}

namespace {

nlohmann::json spec_to_json(const ExperimentSpec& spec) {
  nlohmann::json j;
  j["sim"] = {
      {"aps", spec.sim.aps},
      {"antennas", spec.sim.antennas},
      {"users", spec.sim.users},
      {"seq_len", spec.sim.seq_len},
      {"activation_prob", spec.sim.activation_prob},
      {"area_side_m", spec.sim.area_side_m},
      {"shadow_var_db2", spec.sim.shadow_var_db2},
      {"noise_dbm", spec.sim.noise_dbm},
      {"max_power_w", spec.sim.max_power_w},
      {"colocated", spec.sim.colocated},
      {"power_policy",
       spec.sim.power.kind == PowerPolicy::Kind::full_power ? "full_power" : "target_snr"},
      {"target_snr_db", std::isfinite(spec.sim.power.target_db)
                            ? nlohmann::json(spec.sim.power.target_db)
                            : nlohmann::json("auto")},
      {"silence_in_outage", spec.sim.power.silence_in_outage},
  };
  j["detector"] = {
      {"algorithm", algorithm_name(spec.det.algorithm)},
      {"cluster_size", spec.det.cluster_size},
      {"groups", spec.det.groups},
      {"max_iterations", spec.det.max_iterations},
      {"cost_audit", spec.det.cost_audit},
  };
  j["fronthaul"] = {
      {"enabled", spec.fronthaul.enabled},
      {"bits", spec.fronthaul.format.bits_per_complex},
      {"mantissa_bits", spec.fronthaul.format.mantissa_bits},
      {"mode", !spec.fronthaul.mode ? "auto"
               : *spec.fronthaul.mode == PayloadMode::raw_signals ? "raw" : "cov"},
  };
  j["run"] = {
      {"trials", spec.n_trials},
      {"seed", spec.root_seed},
      {"thresholds", spec.thresholds},
      {"output_dir", spec.output_dir},
      {"workers", spec.workers},
      {"keep_traces", spec.keep_traces},
      {"calibration_samples", spec.calibration_samples},
      {"preset", spec.preset_name},
      {"scale", spec.scale},
  };
  return j;
}

}  // namespace

void emit_outputs(const ExperimentResult& result, const ExperimentSpec& spec,
                  const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path base(dir);

  {
    std::ofstream os(base / "roc.csv");
    if (!os) throw std::runtime_error("cannot write " + (base / "roc.csv").string());
    write_roc_csv(result.roc, os);
  }
  {
    std::ofstream os(base / "trials.csv");
    os << "trial_id,n_active,iterations,final_cost\n";
    for (const auto& rec : result.records) {
      if (rec.excluded) continue;
      os << rec.trial_id << "," << rec.active_set.size() << "," << rec.iterations_run
         << "," << format_double(rec.final_cost) << "\n";
    }
  }
  {
    std::ofstream os(base / "records.csv");
    os << "trial_id,user,gamma,rho,active\n";
    for (const auto& rec : result.records) {
      if (rec.excluded) continue;
      std::size_t next_active = 0;
      for (Eigen::Index k = 0; k < rec.gamma.size(); ++k) {
        const bool active = next_active < rec.active_set.size() &&
                            rec.active_set[next_active] == static_cast<int>(k);
        if (active) ++next_active;
        os << rec.trial_id << "," << k << "," << format_double(rec.gamma[k]) << ","
           << format_double(rec.rho[k]) << "," << (active ? 1 : 0) << "\n";
      }
    }
  }
  if (spec.keep_traces) {
    {
      std::ofstream os(base / "cost_trace.csv");
      os << "trial_id,iteration,cost,support\n";
      for (const auto& rec : result.records) {
        if (rec.excluded) continue;
        for (std::size_t i = 0; i < rec.cost_trace.size(); ++i)
          os << rec.trial_id << "," << i << "," << format_double(rec.cost_trace[i])
             << "," << rec.support_trace[i] << "\n";
      }
    }
    // debug dump of the first trial's network realization
    if (!result.records.empty()) {
      SimParams sim = spec.sim;
      if (std::isfinite(result.resolved_target_db))
        sim.power.target_db = result.resolved_target_db;
      const std::uint64_t seed = trial_seed(spec, 0);
      const Scenario scn = generate_scenario(sim, seed);
      const ActivityDraw draw = sample_activity(sim.users, sim.activation_prob, seed);
      const ReceivedBatch batch = synthesize_received(scn, draw.flags, seed, false);
      std::ofstream os(base / "scenario0.txt");
      export_scenario(scn, os);
      export_batch(batch, os);
    }
  }
  {
    nlohmann::json manifest;
    manifest["version"] = kVersion;
    manifest["spec"] = spec_to_json(spec);
    manifest["resolved_target_snr_db"] =
        std::isfinite(result.resolved_target_db)
            ? nlohmann::json(result.resolved_target_db)
            : nlohmann::json(nullptr);
    manifest["trials_total"] = static_cast<int>(result.records.size());
    manifest["trials_excluded"] = result.excluded_trials;
    manifest["geometry_per_trial"] = true;  // placements are redrawn every trial
    manifest["files"] = {"roc.csv", "trials.csv", "records.csv"};
    if (spec.keep_traces) manifest["files"].push_back("cost_trace.csv");
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    manifest["timestamp_unix"] =
        std::chrono::duration_cast<std::chrono::seconds>(now).count();
    std::ofstream os(base / "manifest.json");
    os << manifest.dump(2) << "\n";
  }
}

std::vector<GammaRecord> load_records_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open records file: " + path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "trial_id,user,gamma,rho,active")
    throw std::runtime_error("records file has unexpected header: " + path);

  std::vector<GammaRecord> records;
  long current_trial = -1;
  std::vector<double> gamma, rho;
  std::vector<int> active;

  auto flush = [&] {
    if (current_trial < 0) return;
    GammaRecord rec;
    rec.gamma = Eigen::Map<const Eigen::VectorXd>(gamma.data(),
                                                  static_cast<Eigen::Index>(gamma.size()));
    rec.rho = Eigen::Map<const Eigen::VectorXd>(rho.data(),
                                                static_cast<Eigen::Index>(rho.size()));
    rec.active_set = active;
    records.push_back(std::move(rec));
    gamma.clear();
    rho.clear();
    active.clear();
  };

  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    long trial_id;
    long user;
    double g, r;
    int a;
    if (std::sscanf(line.c_str(), "%ld,%ld,%lf,%lf,%d", &trial_id, &user, &g, &r, &a) != 5)
      throw std::runtime_error("bad records row: " + line);
    if (trial_id != current_trial) {
      flush();
      current_trial = trial_id;
    }
    gamma.push_back(g);
    rho.push_back(r);
    if (a) active.push_back(static_cast<int>(user));
  }
  flush();
  return records;
}

}  // namespace cfad
