#include "ppg/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace ppg {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::PpgDual: return "ppg-dual";
    case Variant::PpgSingleNet: return "ppg-single-net";
    case Variant::PpgKlPenalty: return "ppg-kl-penalty";
    case Variant::PpgNoAuxValue: return "ppg-no-aux-value";
    case Variant::PpoShared: return "ppo-shared";
    case Variant::PpoSeparate: return "ppo-separate";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::PpgDual, Variant::PpgSingleNet,
                    Variant::PpgKlPenalty, Variant::PpgNoAuxValue,
                    Variant::PpoShared, Variant::PpoSeparate})
    if (name == variant_name(v)) return v;
  throw ConfigError(
      "unknown variant '" + name +
      "' (expected ppg-dual, ppg-single-net, ppg-kl-penalty, "
      "ppg-no-aux-value, ppo-shared or ppo-separate)");
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  std::size_t b = s.find_last_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + v + "' is not an integer");
  }
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + v + "' is not a number");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

AdvNorm parse_adv_norm(const std::string& v) {
  if (v == "batch") return AdvNorm::Batch;
  if (v == "minibatch") return AdvNorm::Minibatch;
  if (v == "off") return AdvNorm::Off;
  throw ConfigError("optim.adv_norm must be batch, minibatch or off, got '" + v + "'");
}

const char* adv_norm_name(AdvNorm n) {
  switch (n) {
    case AdvNorm::Batch: return "batch";
    case AdvNorm::Minibatch: return "minibatch";
    case AdvNorm::Off: return "off";
  }
  return "?";
}

// Per-env numeric override keys; anything else under env.* is rejected here
// and the env constructor revalidates values.
const std::set<std::string> kEnvParamKeys = {"size", "max_steps", "obstacles",
                                             "length", "actions"};

}  // namespace

void config_set(ExperimentConfig& cfg, const std::string& raw_key,
                const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string v = trim(raw_value);
  using H = std::function<void()>;
  const auto set_env_param = [&](const std::string& name) {
    cfg.env_params[name] = parse_real(key, v);
  };

  static const std::string env_prefix = "env.";
  if (key.rfind(env_prefix, 0) == 0) {
    const std::string sub = key.substr(env_prefix.size());
    if (sub == "name") {
      cfg.env_name = v;
    } else if (sub == "num_envs") {
      cfg.hp.num_envs = static_cast<int>(parse_int(key, v));
    } else if (kEnvParamKeys.count(sub)) {
      set_env_param(sub);
    } else {
      throw ConfigError("unknown key '" + key + "'");
    }
    cfg.explicit_keys.insert(key);
    return;
  }

  const std::vector<std::pair<std::string, H>> handlers = {
      {"gae.gamma", [&] { cfg.hp.gamma = parse_real(key, v); }},
      {"gae.lambda", [&] { cfg.hp.lambda = parse_real(key, v); }},
      {"reward.normalize", [&] { cfg.hp.reward_norm = parse_bool(key, v); }},
      {"nn.hidden",
       [&] {
         cfg.hp.hidden.clear();
         for (const auto& item : split_list(v))
           cfg.hp.hidden.push_back(static_cast<int>(parse_int(key, item)));
         if (cfg.hp.hidden.empty())
           throw ConfigError("nn.hidden needs at least one layer size");
       }},
      {"nn.precision",
       [&] {
         if (v == "f64")
           cfg.precision = Precision::F64;
         else if (v == "f32")
           cfg.precision = Precision::F32;
         else
           throw ConfigError("nn.precision must be f64 or f32, got '" + v + "'");
       }},
      {"optim.lr", [&] { cfg.hp.lr = parse_real(key, v); }},
      {"optim.adam_beta1", [&] { cfg.hp.adam.beta1 = parse_real(key, v); }},
      {"optim.adam_beta2", [&] { cfg.hp.adam.beta2 = parse_real(key, v); }},
      {"optim.adam_eps", [&] { cfg.hp.adam.eps = parse_real(key, v); }},
      {"optim.max_grad_norm", [&] { cfg.hp.max_grad_norm = parse_real(key, v); }},
      {"optim.adv_norm", [&] { cfg.hp.adv_norm = parse_adv_norm(v); }},
      {"rollout.horizon", [&] { cfg.hp.horizon = static_cast<int>(parse_int(key, v)); }},
      {"rollout.minibatches",
       [&] { cfg.hp.minibatches_per_epoch = static_cast<int>(parse_int(key, v)); }},
      {"phasic.variant", [&] { cfg.variant = parse_variant(v); }},
      {"phasic.n_pi", [&] { cfg.hp.n_pi = static_cast<int>(parse_int(key, v)); }},
      {"phasic.e_pi", [&] { cfg.hp.e_pi = static_cast<int>(parse_int(key, v)); }},
      {"phasic.e_v", [&] { cfg.hp.e_v = static_cast<int>(parse_int(key, v)); }},
      {"phasic.e_aux", [&] { cfg.hp.e_aux = static_cast<int>(parse_int(key, v)); }},
      {"phasic.aux_minibatches_per_npi",
       [&] { cfg.hp.aux_minibatches_per_npi = static_cast<int>(parse_int(key, v)); }},
      {"phasic.beta_clone", [&] { cfg.hp.beta_clone = parse_real(key, v); }},
      {"phasic.beta_s", [&] { cfg.hp.beta_s = parse_real(key, v); }},
      {"phasic.clip_eps", [&] { cfg.hp.clip_eps = parse_real(key, v); }},
      {"phasic.beta_pi", [&] { cfg.hp.beta_pi = parse_real(key, v); }},
      {"phasic.vf_coef", [&] { cfg.hp.vf_coef = parse_real(key, v); }},
      {"run.total_steps",
       [&] { cfg.hp.total_steps = static_cast<std::int64_t>(parse_int(key, v)); }},
      {"run.seeds",
       [&] {
         cfg.seeds.clear();
         for (const auto& item : split_list(v))
           cfg.seeds.push_back(static_cast<std::uint64_t>(parse_int(key, item)));
         if (cfg.seeds.empty()) throw ConfigError("run.seeds needs at least one seed");
       }},
      {"run.out_dir", [&] { cfg.out_dir = v; }},
      {"run.checkpoint_every",
       [&] { cfg.checkpoint_every = static_cast<int>(parse_int(key, v)); }},
      {"run.summary_window",
       [&] { cfg.summary_window = static_cast<int>(parse_int(key, v)); }},
      {"run.dump_rollout_every",
       [&] { cfg.dump_rollout_every = static_cast<int>(parse_int(key, v)); }},
  };

  for (const auto& [k, fn] : handlers) {
    if (k == key) {
      fn();
      cfg.explicit_keys.insert(key);
      return;
    }
  }
  throw ConfigError("unknown key '" + key + "'");
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected 'key = value', got '" + t + "'");
    config_set(cfg, t.substr(0, eq), t.substr(eq + 1));
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& kvs) {
  for (const auto& kv : kvs) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override '" + kv + "' must look like key=value");
    config_set(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
}

void validate_hyperparameters(const Hyperparameters& hp, Variant variant) {
  const Eigen::Index batch = static_cast<Eigen::Index>(hp.num_envs) * hp.horizon;
  if (hp.num_envs < 1) throw ConfigError("env.num_envs must be >= 1");
  if (hp.horizon < 1) throw ConfigError("rollout.horizon must be >= 1");
  if (hp.n_pi < 1) throw ConfigError("phasic.n_pi must be >= 1");
  if (hp.e_pi < 0 || hp.e_v < 0 || hp.e_aux < 0)
    throw ConfigError("epoch counts must be >= 0");
  if (hp.minibatches_per_epoch < 1 || batch % hp.minibatches_per_epoch != 0)
    throw ConfigError("rollout.minibatches (" +
                      std::to_string(hp.minibatches_per_epoch) +
                      ") must divide the rollout batch size (" +
                      std::to_string(batch) + ")");
  if (variant_has_aux_phase(variant) &&
      (hp.aux_minibatches_per_npi < 1 || batch % hp.aux_minibatches_per_npi != 0))
    throw ConfigError("phasic.aux_minibatches_per_npi (" +
                      std::to_string(hp.aux_minibatches_per_npi) +
                      ") must divide the per-iteration batch size (" +
                      std::to_string(batch) + ")");
  if (hp.clip_eps <= 0.0 || hp.clip_eps >= 1.0)
    throw ConfigError("phasic.clip_eps must be in (0, 1)");
  if (hp.gamma <= 0.0 || hp.gamma > 1.0)
    throw ConfigError("gae.gamma must be in (0, 1]");
  if (hp.lambda < 0.0 || hp.lambda > 1.0)
    throw ConfigError("gae.lambda must be in [0, 1]");
  if (hp.beta_pi < 0.0) throw ConfigError("phasic.beta_pi must be >= 0");
  if (hp.lr < 0.0) throw ConfigError("optim.lr must be >= 0");
  if (hp.total_steps < 1) throw ConfigError("run.total_steps must be >= 1");
  for (int h : hp.hidden)
    if (h < 1) throw ConfigError("nn.hidden sizes must be >= 1");
}

void finalize_config(ExperimentConfig& cfg) {
  // The tuned PPO baseline uses 3 epochs of sample reuse; PPG defaults to 1.
  // The aux-value-skip variant compensates with extra value epochs.
  const bool ppo = cfg.variant == Variant::PpoShared ||
                   cfg.variant == Variant::PpoSeparate;
  if (ppo && !cfg.explicit_keys.count("phasic.e_pi")) cfg.hp.e_pi = 3;
  if (ppo && !cfg.explicit_keys.count("phasic.e_v")) cfg.hp.e_v = 3;
  if (cfg.variant == Variant::PpgNoAuxValue &&
      !cfg.explicit_keys.count("phasic.e_v"))
    cfg.hp.e_v = 2;

  validate_hyperparameters(cfg.hp, cfg.variant);
  if (cfg.summary_window < 1)
    throw ConfigError("run.summary_window must be >= 1");
  if (cfg.checkpoint_every < 0)
    throw ConfigError("run.checkpoint_every must be >= 0");
  if (cfg.dump_rollout_every < 0)
    throw ConfigError("run.dump_rollout_every must be >= 0");
  // Probe construction validates the env name and its parameter set.
  make_env_instance(cfg.env_name, cfg.env_params);
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream s;
  s << "# phasic experiment config (canonical snapshot)\n";
  s << "env.name = " << cfg.env_name << "\n";
  s << "env.num_envs = " << cfg.hp.num_envs << "\n";
  for (const auto& [k, v] : cfg.env_params)
    s << "env." << k << " = " << fmt_real(v) << "\n";
  s << "phasic.variant = " << variant_name(cfg.variant) << "\n";
  s << "phasic.n_pi = " << cfg.hp.n_pi << "\n";
  s << "phasic.e_pi = " << cfg.hp.e_pi << "\n";
  s << "phasic.e_v = " << cfg.hp.e_v << "\n";
  s << "phasic.e_aux = " << cfg.hp.e_aux << "\n";
  s << "phasic.aux_minibatches_per_npi = " << cfg.hp.aux_minibatches_per_npi << "\n";
  s << "phasic.beta_clone = " << fmt_real(cfg.hp.beta_clone) << "\n";
  s << "phasic.beta_s = " << fmt_real(cfg.hp.beta_s) << "\n";
  s << "phasic.clip_eps = " << fmt_real(cfg.hp.clip_eps) << "\n";
  s << "phasic.beta_pi = " << fmt_real(cfg.hp.beta_pi) << "\n";
  s << "phasic.vf_coef = " << fmt_real(cfg.hp.vf_coef) << "\n";
  s << "rollout.horizon = " << cfg.hp.horizon << "\n";
  s << "rollout.minibatches = " << cfg.hp.minibatches_per_epoch << "\n";
  s << "gae.gamma = " << fmt_real(cfg.hp.gamma) << "\n";
  s << "gae.lambda = " << fmt_real(cfg.hp.lambda) << "\n";
  s << "reward.normalize = " << (cfg.hp.reward_norm ? "true" : "false") << "\n";
  s << "nn.hidden = ";
  for (std::size_t i = 0; i < cfg.hp.hidden.size(); ++i)
    s << cfg.hp.hidden[i] << (i + 1 < cfg.hp.hidden.size() ? "," : "");
  s << "\n";
  s << "nn.precision = " << (cfg.precision == Precision::F64 ? "f64" : "f32") << "\n";
  s << "optim.lr = " << fmt_real(cfg.hp.lr) << "\n";
  s << "optim.adam_beta1 = " << fmt_real(cfg.hp.adam.beta1) << "\n";
  s << "optim.adam_beta2 = " << fmt_real(cfg.hp.adam.beta2) << "\n";
  s << "optim.adam_eps = " << fmt_real(cfg.hp.adam.eps) << "\n";
  s << "optim.max_grad_norm = " << fmt_real(cfg.hp.max_grad_norm) << "\n";
  s << "optim.adv_norm = " << adv_norm_name(cfg.hp.adv_norm) << "\n";
  s << "run.total_steps = " << cfg.hp.total_steps << "\n";
  s << "run.seeds = ";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
    s << cfg.seeds[i] << (i + 1 < cfg.seeds.size() ? "," : "");
  s << "\n";
  if (!cfg.out_dir.empty()) s << "run.out_dir = " << cfg.out_dir << "\n";
  s << "run.checkpoint_every = " << cfg.checkpoint_every << "\n";
  s << "run.summary_window = " << cfg.summary_window << "\n";
  s << "run.dump_rollout_every = " << cfg.dump_rollout_every << "\n";
  return s.str();
}

TrainerOptions make_trainer_options(const ExperimentConfig& cfg,
                                    std::uint64_t seed,
                                    const std::string& out_dir) {
  TrainerOptions opts;
  opts.hp = cfg.hp;
  opts.variant = cfg.variant;
  opts.env_name = cfg.env_name;
  opts.env_params = cfg.env_params;
  opts.seed = seed;
  opts.out_dir = out_dir;
  opts.checkpoint_every = cfg.checkpoint_every;
  opts.dump_rollout_every = cfg.dump_rollout_every;
  return opts;
}

}  // namespace ppg
