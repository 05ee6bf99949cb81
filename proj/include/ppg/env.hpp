#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ppg/common.hpp"
#include "ppg/rng.hpp"

namespace ppg {

struct EnvSpec {
  std::string name;
  int obs_dim = 0;
  int action_count = 0;
  int max_episode_len = 0;
};

/// Numeric overrides from the experiment config (env.size, env.max_steps,
/// ...). Each environment validates its own key set.
using EnvParams = std::map<std::string, double>;

/// One episodic task instance. Layout is rebuilt from a level seed on every
/// reset; step() applies the documented reward rule and flags `done` on
/// terminal or timeout.
class EnvInstance {
 public:
  virtual ~EnvInstance() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual void reset(std::uint64_t level_seed) = 0;
  virtual double step(int action, bool& done) = 0;
  virtual void observe(double* out) const = 0;
};

std::unique_ptr<EnvInstance> make_env_instance(const std::string& name,
                                               const EnvParams& params);

struct EpisodeResult {
  int instance = 0;
  double ret = 0.0;  // sum of raw rewards
  int length = 0;
};

/// W independent instances with per-instance RNG streams. Instance i draws
/// a fresh level seed from its own stream at every reset, so the level set
/// is unbounded and trajectories are a pure function of (seed, actions).
/// A done instance auto-resets: the returned observation row is the first
/// observation of the next episode.
class VecEnv {
 public:
  VecEnv(const std::string& name, int num_envs, std::uint64_t seed,
         const EnvParams& params = {});

  int num_envs() const { return static_cast<int>(instances_.size()); }
  const EnvSpec& spec() const { return spec_; }

  /// Resets every instance; returns [W x obs_dim].
  Matd reset();

  /// Steps all instances. `completed` collects episodes that ended during
  /// this call (raw returns, for metrics).
  void step(const std::vector<int>& actions, Matd& obs, Vecd& rewards,
            std::vector<std::uint8_t>& dones,
            std::vector<EpisodeResult>* completed = nullptr);

  const Matd& last_obs() const { return last_obs_; }
  std::uint64_t level_seed(int i) const { return instances_[static_cast<std::size_t>(i)].level_seed; }

 private:
  struct Slot {
    std::unique_ptr<EnvInstance> env;
    Rng rng{0};
    std::uint64_t level_seed = 0;
    double ep_return = 0.0;
    int ep_len = 0;
  };

  void reset_instance(Slot& s);

  EnvSpec spec_;
  std::vector<Slot> instances_;
  Matd last_obs_;
};

}  // namespace ppg
