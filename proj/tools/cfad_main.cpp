// cfad: Monte-Carlo driver for covariance-based activity detection in
// cell-free massive MIMO. Subcommands:
//   run      execute an experiment described by an INI spec file
//   preset   execute a named figure preset (paper or desk scale)
//   roc      re-sweep thresholds over an existing records.csv archive
//   snr-cdf  dominant-AP SNR coverage study
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "cfad/harness.hpp"

namespace {

void apply_overrides(cfad::ExperimentSpec& spec, const std::vector<std::string>& overrides) {
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("override must be key=value: " + kv);
    cfad::apply_override(spec, kv.substr(0, eq), kv.substr(eq + 1));
  }
}

int execute(const cfad::ExperimentSpec& spec) {
  std::cout << "running " << spec.n_trials << " trials (K=" << spec.sim.users
            << ", M=" << spec.sim.effective_aps() << ", N=" << spec.sim.effective_antennas()
            << ", L=" << spec.sim.seq_len << ")\n";
  const cfad::ExperimentResult result = cfad::run_experiment(spec);
  cfad::emit_outputs(result, spec, spec.output_dir);
  std::cout << "wrote " << spec.output_dir << "/roc.csv";
  if (result.excluded_trials > 0)
    std::cout << " (" << result.excluded_trials << " trials excluded)";
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"covariance-based activity detection simulator for cell-free massive MIMO"};
  app.require_subcommand(1);

  // run
  std::string spec_path;
  std::string output_dir;
  int workers = -1;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "run an experiment from an INI spec file");
  run->add_option("spec", spec_path, "spec file path")->required()->check(CLI::ExistingFile);
  run->add_option("--output", output_dir, "output directory (overrides spec)");
  run->add_option("--workers", workers, "worker threads (0 = hardware)");
  run->add_option("--set,-D", overrides, "override spec values, key=value");

  // preset
  std::string preset_name, preset_scale = "desk";
  auto* pre = app.add_subcommand("preset", "run a named figure preset");
  pre->add_option("name", preset_name, "preset name")->required();
  pre->add_option("scale", preset_scale, "paper or desk");
  pre->add_option("--output", output_dir, "output directory");
  pre->add_option("--workers", workers, "worker threads (0 = hardware)");
  pre->add_option("overrides", overrides, "key=value overrides");
  pre->add_flag_callback("--list", [] {
    for (const auto& n : cfad::preset_names()) std::cout << n << "\n";
    std::exit(0);
  }, "list preset names and exit");

  // roc
  std::string records_path, grid_text = "log:1e-4:10:60", roc_out = "roc.csv";
  auto* roc = app.add_subcommand("roc", "re-sweep thresholds over a records.csv archive");
  roc->add_option("records", records_path, "records.csv path")->required()->check(CLI::ExistingFile);
  roc->add_option("--thresholds", grid_text, "log:lo:hi:n or comma-separated list");
  roc->add_option("--output", roc_out, "output csv path");

  // snr-cdf
  int samples = 10000;
  std::uint64_t seed = 1;
  std::string cdf_out = "snr_cdf.csv";
  auto* snr = app.add_subcommand("snr-cdf", "dominant-AP SNR empirical CDF");
  snr->add_option("--samples", samples, "number of user placements");
  snr->add_option("--seed", seed, "root seed");
  snr->add_option("--output", cdf_out, "output csv path");
  snr->add_option("--set,-D", overrides, "override sim values, key=value");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run || *pre) {
      cfad::ExperimentSpec spec =
          *run ? cfad::load_spec(spec_path) : cfad::preset(preset_name, preset_scale);
      apply_overrides(spec, overrides);
      if (!output_dir.empty()) spec.output_dir = output_dir;
      if (workers >= 0) spec.workers = workers;
      return execute(spec);
    }
    if (*roc) {
      const auto records = cfad::load_records_csv(records_path);
      const auto grid = cfad::parse_threshold_grid(grid_text);
      const cfad::RocCurve curve = cfad::roc_sweep(records, grid);
      std::ofstream os(roc_out);
      if (!os) throw std::runtime_error("cannot write " + roc_out);
      cfad::write_roc_csv(curve, os);
      std::cout << "wrote " << roc_out << " (" << records.size() << " trials)\n";
      return 0;
    }
    if (*snr) {
      cfad::ExperimentSpec spec = cfad::preset("fig2-snr", "desk");
      apply_overrides(spec, overrides);
      const cfad::EmpiricalCdf cdf = cfad::snr_cdf(spec.sim, samples, seed);
      std::ofstream os(cdf_out);
      if (!os) throw std::runtime_error("cannot write " + cdf_out);
      cfad::write_snr_cdf_csv(cdf, os);
      std::cout << "wrote " << cdf_out << "; 5% quantile = " << cdf.quantile(0.05)
                << " dB\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
