// Experiment CLI: run / sweep / plot / validate-config / gradcheck.
// Exit codes: 0 ok, 1 configuration error, 2 runtime failure.

#include <cstdio>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "ppg/config.hpp"
#include "ppg/gradcheck.hpp"
#include "ppg/harness.hpp"

namespace {

ppg::ExperimentConfig build_config(const std::string& config_path,
                                   const std::vector<std::string>& sets,
                                   const std::string& env_name,
                                   const std::string& variant,
                                   const std::string& seeds, long long steps,
                                   const std::string& out_dir) {
  ppg::ExperimentConfig cfg = config_path.empty()
                                  ? ppg::ExperimentConfig{}
                                  : ppg::load_config_file(config_path);
  if (!env_name.empty()) ppg::config_set(cfg, "env.name", env_name);
  if (!variant.empty()) ppg::config_set(cfg, "phasic.variant", variant);
  if (!seeds.empty()) ppg::config_set(cfg, "run.seeds", seeds);
  if (steps > 0) ppg::config_set(cfg, "run.total_steps", std::to_string(steps));
  if (!out_dir.empty()) ppg::config_set(cfg, "run.out_dir", out_dir);
  ppg::apply_overrides(cfg, sets);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phasic policy gradient trainer and experiment harness"};
  app.require_subcommand(1);

  std::string config_path, env_name, variant, seeds, out_dir, suite;
  std::vector<std::string> sets;
  std::vector<std::string> plot_inputs;
  std::string plot_out, plot_title = "learning curves";
  long long steps = 0;
  int jobs = static_cast<int>(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;
  double ema = 0.9;

  auto add_config_opts = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config file (key = value lines)");
    cmd->add_option("--set", sets, "override, key=value (repeatable)");
    cmd->add_option("--env", env_name, "environment name");
    cmd->add_option("--variant", variant, "algorithm variant");
    cmd->add_option("--seeds", seeds, "comma-separated seed list");
    cmd->add_option("--steps", steps, "total env steps");
    cmd->add_option("--out", out_dir, "output directory root");
  };

  CLI::App* run = app.add_subcommand("run", "train with one config");
  add_config_opts(run);
  run->add_option("--jobs", jobs, "parallel seed runs");

  CLI::App* sweep = app.add_subcommand("sweep", "run a named ablation suite");
  sweep->add_option("--suite", suite, "suite name")->required();
  add_config_opts(sweep);
  sweep->add_option("--jobs", jobs, "parallel runs");

  CLI::App* plot = app.add_subcommand("plot", "render learning curves to SVG");
  plot->add_option("inputs", plot_inputs, "run directories or metrics.csv files")
      ->required();
  plot->add_option("--out", plot_out, "output SVG path")->required();
  plot->add_option("--ema", ema, "EMA smoothing factor (plot-time only)");
  plot->add_option("--title", plot_title, "chart title");

  CLI::App* validate =
      app.add_subcommand("validate-config", "parse, validate and print a config");
  add_config_opts(validate);

  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "finite-difference check of every loss gradient");
  int gc_instances = 20;
  gradcheck->add_option("--instances", gc_instances, "random instances per loss");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      ppg::ExperimentConfig cfg = build_config(config_path, sets, env_name,
                                               variant, seeds, steps, out_dir);
      ppg::finalize_config(cfg);
      ppg::run_experiment(cfg, jobs, std::cout);
    } else if (sweep->parsed()) {
      ppg::ExperimentConfig cfg = build_config(config_path, sets, env_name,
                                               variant, seeds, steps, out_dir);
      ppg::run_sweep(suite, cfg, jobs, std::cout);
    } else if (plot->parsed()) {
      ppg::PlotOptions opts;
      opts.out_path = plot_out;
      opts.ema = ema;
      opts.title = plot_title;
      ppg::plot_runs(plot_inputs, opts);
      std::cout << "wrote " << plot_out << "\n";
    } else if (validate->parsed()) {
      ppg::ExperimentConfig cfg = build_config(config_path, sets, env_name,
                                               variant, seeds, steps, out_dir);
      ppg::finalize_config(cfg);
      std::cout << ppg::serialize_config(cfg);
    } else if (gradcheck->parsed()) {
      const auto results = ppg::run_gradient_checks(gc_instances);
      bool all_pass = true;
      for (const auto& r : results) {
        std::printf("%-10s max scaled error %.3e  %s\n", r.loss_name.c_str(),
                    r.max_err, r.pass ? "PASS" : "FAIL");
        all_pass = all_pass && r.pass;
      }
      if (!all_pass) return 2;
    }
  } catch (const ppg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
