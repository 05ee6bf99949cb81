#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "ppg/env.hpp"
#include "ppg/phasic.hpp"

namespace ppg {

enum class Precision { F64, F32 };

/// A fully resolved experiment: env + variant + hyperparameters + run
/// settings. Defaults reproduce the published table exactly; the config file
/// is a flat `namespace.key = value` text format where unknown keys are
/// errors.
struct ExperimentConfig {
  std::string env_name = "keydoor";
  EnvParams env_params;
  Hyperparameters hp;
  Variant variant = Variant::PpgDual;
  Precision precision = Precision::F64;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::string out_dir;
  int checkpoint_every = 0;
  int summary_window = 16;
  int dump_rollout_every = 0;

  /// Keys that were set explicitly (file or override); used for the
  /// variant-conditional epoch defaults and recorded in the snapshot.
  std::set<std::string> explicit_keys;
};

/// Applies one `key = value` assignment. Unknown keys and malformed values
/// throw ConfigError naming the key.
void config_set(ExperimentConfig& cfg, const std::string& key,
                const std::string& value);

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

/// Overrides of the form "key=value".
void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& kvs);

/// Variant-conditional defaults (PPO baselines default to 3 epochs, the
/// aux-value-skip variant raises E_V to 2) followed by full validation,
/// including a probe construction of the environment.
void finalize_config(ExperimentConfig& cfg);

/// Canonical full snapshot: every key, current values. Parsing it back
/// reproduces the config.
std::string serialize_config(const ExperimentConfig& cfg);

/// Shared validation used by both finalize_config and the trainer.
void validate_hyperparameters(const Hyperparameters& hp, Variant variant);

TrainerOptions make_trainer_options(const ExperimentConfig& cfg,
                                    std::uint64_t seed,
                                    const std::string& out_dir);

}  // namespace ppg
