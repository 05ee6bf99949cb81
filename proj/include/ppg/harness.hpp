#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ppg/config.hpp"
#include "ppg/metrics.hpp"

namespace ppg {

struct RunSummary {
  std::uint64_t seed = 0;
  std::string dir;
  double final_return = 0.0;  // mean episode return near the budget end
};

struct ExperimentSummary {
  std::string dir;
  std::vector<RunSummary> runs;
  double mean_final_return = 0.0;
  double std_final_return = 0.0;
};

/// Output root: run.out_dir if set, else $PPG_OUTPUT_ROOT, else ./runs.
std::string output_root(const ExperimentConfig& cfg);

/// Mean ep_ret_mean over the last `window` rows that completed episodes.
double final_return_from_csv(const CsvTable& table, int window);

/// Runs config x seeds (in parallel up to `jobs`), writing per-seed
/// subdirectories with metrics.csv, a config snapshot and checkpoints, then
/// prints and stores the cross-seed summary line.
ExperimentSummary run_experiment(const ExperimentConfig& cfg, int jobs,
                                 std::ostream& log,
                                 const std::string& dir_override = "");

/// Named sweep presets from the ablation suites; each returns
/// (label, overrides) pairs applied on top of the base config.
std::vector<std::pair<std::string, std::vector<std::string>>> sweep_preset(
    const std::string& suite);
std::vector<std::string> sweep_suite_names();

/// Runs one preset (config set x seeds) and emits an aggregate comparison
/// plot with a mean curve and +-1 std band per configuration.
void run_sweep(const std::string& suite, const ExperimentConfig& base, int jobs,
               std::ostream& log);

struct PlotOptions {
  std::string out_path;
  double ema = 0.9;  // smoothing factor applied at plot time only
  std::string title = "learning curves";
};

/// Inputs are run directories (with seed_*/metrics.csv inside) or single
/// metrics.csv files; one curve per input, mean +- std across its seeds.
void plot_runs(const std::vector<std::string>& inputs, const PlotOptions& opts);

}  // namespace ppg
