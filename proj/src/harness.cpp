#include "ppg/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include "ppg/svg.hpp"

namespace fs = std::filesystem;

namespace ppg {

std::string output_root(const ExperimentConfig& cfg) {
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  if (const char* env = std::getenv("PPG_OUTPUT_ROOT"); env && *env)
    return env;
  return "runs";
}

double final_return_from_csv(const CsvTable& table, int window) {
  const auto rets = table.numeric_column("ep_ret_mean");
  double acc = 0.0;
  int n = 0;
  for (std::size_t i = rets.size(); i-- > 0 && n < window;) {
    if (std::isnan(rets[i])) continue;
    acc += rets[i];
    ++n;
  }
  return n > 0 ? acc / n : NAN;
}

namespace {

std::mutex g_log_mutex;

void run_one_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                  const std::string& dir, std::ostream& log) {
  fs::create_directories(dir);
  {
    std::ofstream snap(dir + "/config.ini");
    snap << serialize_config(cfg);
    snap << "# resolved seed for this run\n";
    snap << "# seed = " << seed << "\n";
  }
  MetricsWriter writer(dir + "/metrics.csv");
  const TrainerOptions opts = make_trainer_options(cfg, seed, dir);
  const RowSink sink = [&writer](const MetricsRow& r) { writer.write(r); };
  if (cfg.precision == Precision::F64) {
    Trainer<double> t(opts, sink);
    t.run();
  } else {
    Trainer<float> t(opts, sink);
    t.run();
  }
  {
    std::lock_guard<std::mutex> lock(g_log_mutex);
    log << "  seed " << seed << " done -> " << dir << "\n";
  }
}

/// EMA smoothing over a series with NaN gaps; plot-time only.
std::vector<double> ema_smooth(const std::vector<double>& y, double alpha) {
  std::vector<double> out(y.size(), NAN);
  double acc = NAN;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isnan(y[i]))
      acc = std::isnan(acc) ? y[i] : alpha * acc + (1.0 - alpha) * y[i];
    out[i] = acc;
  }
  return out;
}

struct SeriesGroup {
  std::string label;
  std::vector<CsvTable> tables;
};

Curve group_to_curve(const SeriesGroup& group, double ema) {
  Curve c;
  c.label = group.label;
  std::size_t rows = 0;
  for (const auto& t : group.tables) rows = std::max(rows, t.rows.size());
  std::vector<std::vector<double>> smoothed;
  std::vector<double> xs;
  for (const auto& t : group.tables) {
    smoothed.push_back(ema_smooth(t.numeric_column("ep_ret_mean"), ema));
    if (xs.empty()) xs = t.numeric_column("env_steps");
  }
  for (std::size_t i = 0; i < rows; ++i) {
    double sum = 0, sum2 = 0;
    int n = 0;
    for (const auto& s : smoothed) {
      if (i >= s.size() || std::isnan(s[i])) continue;
      sum += s[i];
      sum2 += s[i] * s[i];
      ++n;
    }
    if (n == 0) continue;
    const double mean = sum / n;
    const double var = std::max(0.0, sum2 / n - mean * mean);
    c.x.push_back(i < xs.size() ? xs[i] : static_cast<double>(i));
    c.y.push_back(mean);
    c.band_lo.push_back(mean - std::sqrt(var));
    c.band_hi.push_back(mean + std::sqrt(var));
  }
  return c;
}

SeriesGroup load_group(const std::string& input) {
  SeriesGroup g;
  fs::path p(input);
  if (fs::is_directory(p)) {
    g.label = p.filename().string();
    if (g.label.empty()) g.label = p.parent_path().filename().string();
    std::vector<fs::path> csvs;
    for (const auto& entry : fs::recursive_directory_iterator(p))
      if (entry.path().filename() == "metrics.csv") csvs.push_back(entry.path());
    std::sort(csvs.begin(), csvs.end());
    for (const auto& csv : csvs) g.tables.push_back(CsvTable::load(csv.string()));
    if (g.tables.empty())
      throw ConfigError("no metrics.csv found under '" + input + "'");
  } else {
    g.label = p.parent_path().filename().string();
    if (g.label.empty()) g.label = input;
    g.tables.push_back(CsvTable::load(input));
  }
  for (const auto& t : g.tables)
    if (t.rows.empty())
      throw ConfigError("metrics file under '" + input + "' has no data rows");
  return g;
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentConfig& cfg, int jobs,
                                 std::ostream& log,
                                 const std::string& dir_override) {
  ExperimentSummary summary;
  std::string dir = dir_override;
  if (dir.empty())
    dir = output_root(cfg) + "/" + cfg.env_name + "_" + variant_name(cfg.variant);
  summary.dir = dir;
  fs::create_directories(dir);

  if (jobs < 1) jobs = 1;
  std::vector<std::uint64_t> seeds = cfg.seeds;
  std::vector<std::exception_ptr> errors(seeds.size());
  std::size_t next = 0;
  std::mutex next_mutex;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(next_mutex);
        if (next >= seeds.size()) return;
        i = next++;
      }
      const std::string seed_dir = dir + "/seed_" + std::to_string(seeds[i]);
      try {
        run_one_seed(cfg, seeds[i], seed_dir, log);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_threads = std::min<std::size_t>(jobs, seeds.size());
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  double sum = 0, sum2 = 0;
  for (std::uint64_t seed : seeds) {
    RunSummary rs;
    rs.seed = seed;
    rs.dir = dir + "/seed_" + std::to_string(seed);
    rs.final_return = final_return_from_csv(
        CsvTable::load(rs.dir + "/metrics.csv"), cfg.summary_window);
    summary.runs.push_back(rs);
    sum += rs.final_return;
    sum2 += rs.final_return * rs.final_return;
  }
  const double n = static_cast<double>(seeds.size());
  summary.mean_final_return = sum / n;
  summary.std_final_return =
      std::sqrt(std::max(0.0, sum2 / n - summary.mean_final_return *
                                            summary.mean_final_return));
  char line[256];
  std::snprintf(line, sizeof(line),
                "final return over %zu seed(s): %.4f +- %.4f", seeds.size(),
                summary.mean_final_return, summary.std_final_return);
  log << line << "\n";
  std::ofstream sf(dir + "/summary.txt");
  sf << line << "\n";
  for (const auto& r : summary.runs)
    sf << "seed " << r.seed << ": " << r.final_return << "\n";
  return summary;
}

std::vector<std::string> sweep_suite_names() {
  return {"policy-sr",  "value-sr",   "aux-freq",           "kl-vs-clip",
          "single-net", "ppo-sr",     "shared-vs-separate", "aux-value-skip"};
}

std::vector<std::pair<std::string, std::vector<std::string>>> sweep_preset(
    const std::string& suite) {
  std::vector<std::pair<std::string, std::vector<std::string>>> out;
  if (suite == "policy-sr") {
    for (int e : {1, 2, 3, 6})
      out.push_back({"e_pi_" + std::to_string(e),
                     {"phasic.variant=ppg-dual", "phasic.e_pi=" + std::to_string(e)}});
  } else if (suite == "value-sr") {
    for (int e : {1, 2, 6, 9})
      out.push_back({"e_aux_" + std::to_string(e),
                     {"phasic.variant=ppg-dual", "phasic.e_aux=" + std::to_string(e)}});
  } else if (suite == "aux-freq") {
    for (int n : {2, 4, 8, 16, 32})
      out.push_back({"n_pi_" + std::to_string(n),
                     {"phasic.variant=ppg-dual", "phasic.n_pi=" + std::to_string(n)}});
  } else if (suite == "kl-vs-clip") {
    out.push_back({"clip", {"phasic.variant=ppg-dual"}});
    out.push_back({"kl_penalty", {"phasic.variant=ppg-kl-penalty"}});
  } else if (suite == "single-net") {
    out.push_back({"dual_net", {"phasic.variant=ppg-dual"}});
    out.push_back({"single_net", {"phasic.variant=ppg-single-net"}});
    out.push_back({"ppo", {"phasic.variant=ppo-shared"}});
  } else if (suite == "ppo-sr") {
    for (int e = 1; e <= 6; ++e)
      out.push_back({"epochs_" + std::to_string(e),
                     {"phasic.variant=ppo-shared", "phasic.e_pi=" + std::to_string(e),
                      "phasic.e_v=" + std::to_string(e)}});
  } else if (suite == "shared-vs-separate") {
    out.push_back({"shared", {"phasic.variant=ppo-shared"}});
    out.push_back({"separate", {"phasic.variant=ppo-separate"}});
  } else if (suite == "aux-value-skip") {
    out.push_back({"with_aux_value", {"phasic.variant=ppg-dual"}});
    out.push_back({"skip_aux_value", {"phasic.variant=ppg-no-aux-value"}});
  } else {
    std::string names;
    for (const auto& n : sweep_suite_names()) names += " " + n;
    throw ConfigError("unknown sweep suite '" + suite + "'; available:" + names);
  }
  return out;
}

void run_sweep(const std::string& suite, const ExperimentConfig& base, int jobs,
               std::ostream& log) {
  const auto preset = sweep_preset(suite);
  const std::string dir = output_root(base) + "/" + suite;
  fs::create_directories(dir);

  std::vector<std::string> run_dirs;
  std::ofstream sf(dir + "/summary.txt");
  for (const auto& [label, overrides] : preset) {
    ExperimentConfig cfg = base;
    apply_overrides(cfg, overrides);
    finalize_config(cfg);
    log << suite << " / " << label << "\n";
    const auto summary =
        run_experiment(cfg, jobs, log, dir + "/" + label);
    run_dirs.push_back(summary.dir);
    char line[256];
    std::snprintf(line, sizeof(line), "%-20s final return %.4f +- %.4f",
                  label.c_str(), summary.mean_final_return,
                  summary.std_final_return);
    sf << line << "\n";
  }
  PlotOptions popts;
  popts.out_path = dir + "/comparison.svg";
  popts.title = suite + " on " + base.env_name;
  plot_runs(run_dirs, popts);
  log << "wrote " << popts.out_path << "\n";
}

void plot_runs(const std::vector<std::string>& inputs, const PlotOptions& opts) {
  if (inputs.empty()) throw ConfigError("plot: no inputs given");
  if (opts.ema < 0.0 || opts.ema >= 1.0)
    throw ConfigError("plot: ema must be in [0, 1)");
  std::vector<Curve> curves;
  for (const auto& input : inputs)
    curves.push_back(group_to_curve(load_group(input), opts.ema));
  ChartSpec spec;
  spec.title = opts.title;
  render_line_chart(curves, spec, opts.out_path);
}

}  // namespace ppg
