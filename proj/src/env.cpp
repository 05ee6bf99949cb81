#include "ppg/env.hpp"

#include <algorithm>
#include <cstring>
#include <deque>
#include <stdexcept>

namespace ppg {

namespace {

double get_param(const EnvParams& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

void check_keys(const EnvParams& p, std::initializer_list<const char*> known,
                const std::string& env_name) {
  for (const auto& [k, v] : p) {
    bool ok = false;
    for (const char* known_key : known)
      if (k == known_key) ok = true;
    if (!ok)
      throw ConfigError("env parameter '" + k + "' is not valid for env '" +
                        env_name + "'");
  }
}

// ---------------------------------------------------------------------------
// keydoor: N x N grid split into two rooms by a wall with a locked door.
// Key and agent spawn in one room, goal in the other. Rewards: +0.5 for
// picking up the key, +1.0 for reaching the goal (terminal). Episodes time
// out after max_steps with reward 0. Observation: five one-hot N*N planes
// (walls, key, closed door, goal, agent), values in {0,1}.
// ---------------------------------------------------------------------------
class KeydoorEnv final : public EnvInstance {
 public:
  explicit KeydoorEnv(const EnvParams& params) {
    check_keys(params, {"size", "max_steps", "obstacles"}, "keydoor");
    n_ = static_cast<int>(get_param(params, "size", 9));
    if (n_ < 5) throw ConfigError("keydoor: size must be >= 5");
    obstacles_ = static_cast<int>(get_param(params, "obstacles", 6));
    if (obstacles_ < 0) throw ConfigError("keydoor: obstacles must be >= 0");
    spec_.name = "keydoor";
    spec_.obs_dim = 5 * n_ * n_;
    spec_.action_count = 4;
    spec_.max_episode_len = static_cast<int>(get_param(params, "max_steps", 128));
    if (spec_.max_episode_len < 1)
      throw ConfigError("keydoor: max_steps must be >= 1");
    walls_.assign(static_cast<std::size_t>(n_ * n_), 0);
  }

  const EnvSpec& spec() const override { return spec_; }

  void reset(std::uint64_t level_seed) override {
    Rng rng(level_seed);
    for (int attempt = 0; attempt < 32; ++attempt) {
      const int extra = attempt < 24 ? obstacles_ : 0;
      generate(rng, extra);
      if (solvable()) break;
    }
    steps_ = 0;
    has_key_ = false;
    door_open_ = false;
  }

  double step(int action, bool& done) override {
    static const int dr[4] = {-1, 1, 0, 0};
    static const int dc[4] = {0, 0, -1, 1};
    double reward = 0.0;
    done = false;
    const int r = agent_ / n_ + dr[action];
    const int c = agent_ % n_ + dc[action];
    const int cell = r * n_ + c;
    bool blocked = walls_[static_cast<std::size_t>(cell)] != 0;
    if (cell == door_ && !door_open_) {
      if (has_key_) {
        door_open_ = true;
        blocked = false;
      } else {
        blocked = true;
      }
    }
    if (!blocked) {
      agent_ = cell;
      if (agent_ == key_ && !has_key_) {
        has_key_ = true;
        reward += 0.5;
      }
      if (agent_ == goal_) {
        reward += 1.0;
        done = true;
      }
    }
    ++steps_;
    if (steps_ >= spec_.max_episode_len) done = true;
    return reward;
  }

  void observe(double* out) const override {
    const int plane = n_ * n_;
    std::memset(out, 0, sizeof(double) * static_cast<std::size_t>(spec_.obs_dim));
    for (int i = 0; i < plane; ++i)
      if (walls_[static_cast<std::size_t>(i)]) out[i] = 1.0;
    if (!has_key_) out[plane + key_] = 1.0;
    if (!door_open_) out[2 * plane + door_] = 1.0;
    out[3 * plane + goal_] = 1.0;
    out[4 * plane + agent_] = 1.0;
  }

 private:
  void generate(Rng& rng, int extra_obstacles) {
    gen_failed_ = false;
    std::fill(walls_.begin(), walls_.end(), 0);
    for (int i = 0; i < n_; ++i) {
      set_wall(0, i);
      set_wall(n_ - 1, i);
      set_wall(i, 0);
      set_wall(i, n_ - 1);
    }
    const bool vertical = rng.below(2) == 0;
    const int divider = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_ - 4)));
    const int door_line = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_ - 2)));
    for (int i = 1; i < n_ - 1; ++i)
      vertical ? set_wall(i, divider) : set_wall(divider, i);
    door_ = vertical ? door_line * n_ + divider : divider * n_ + door_line;
    walls_[static_cast<std::size_t>(door_)] = 0;  // door cell handled separately

    for (int k = 0; k < extra_obstacles; ++k) {
      const int cell = random_cell(rng);
      if (cell != door_) walls_[static_cast<std::size_t>(cell)] = 1;
    }

    const bool agent_first_room = rng.below(2) == 0;
    agent_ = random_free_cell(rng, vertical, divider, agent_first_room, -1);
    key_ = random_free_cell(rng, vertical, divider, agent_first_room, agent_);
    goal_ = random_free_cell(rng, vertical, divider, !agent_first_room, -1);
  }

  void set_wall(int r, int c) { walls_[static_cast<std::size_t>(r * n_ + c)] = 1; }

  int random_cell(Rng& rng) {
    const int r = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_ - 2)));
    const int c = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_ - 2)));
    return r * n_ + c;
  }

  int random_free_cell(Rng& rng, bool vertical, int divider, bool first_room,
                       int exclude) {
    std::vector<int> candidates;
    for (int r = 1; r < n_ - 1; ++r) {
      for (int c = 1; c < n_ - 1; ++c) {
        const int cell = r * n_ + c;
        if (walls_[static_cast<std::size_t>(cell)] || cell == door_ ||
            cell == exclude)
          continue;
        const int coord = vertical ? c : r;
        if (first_room ? coord < divider : coord > divider)
          candidates.push_back(cell);
      }
    }
    if (candidates.empty()) {
      gen_failed_ = true;
      return door_;  // placeholder; this layout is rejected
    }
    return candidates[rng.below(candidates.size())];
  }

  /// Agent must reach the key with the door closed, then the goal with the
  /// door open.
  bool solvable() const {
    return !gen_failed_ && reachable(agent_, key_, false) &&
           reachable(key_, goal_, true);
  }

  bool reachable(int from, int to, bool door_passable) const {
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(n_ * n_), 0);
    std::deque<int> queue{from};
    seen[static_cast<std::size_t>(from)] = 1;
    while (!queue.empty()) {
      const int cur = queue.front();
      queue.pop_front();
      if (cur == to) return true;
      static const int dr[4] = {-1, 1, 0, 0};
      static const int dc[4] = {0, 0, -1, 1};
      for (int d = 0; d < 4; ++d) {
        const int r = cur / n_ + dr[d];
        const int c = cur % n_ + dc[d];
        if (r < 0 || r >= n_ || c < 0 || c >= n_) continue;
        const int cell = r * n_ + c;
        if (seen[static_cast<std::size_t>(cell)]) continue;
        if (walls_[static_cast<std::size_t>(cell)]) continue;
        if (cell == door_ && !door_passable) continue;
        seen[static_cast<std::size_t>(cell)] = 1;
        queue.push_back(cell);
      }
    }
    return false;
  }

  EnvSpec spec_;
  int n_ = 9;
  int obstacles_ = 6;
  std::vector<std::uint8_t> walls_;
  int agent_ = 0, key_ = 0, door_ = 0, goal_ = 0;
  bool has_key_ = false, door_open_ = false, gen_failed_ = false;
  int steps_ = 0;
};

// ---------------------------------------------------------------------------
// chain: 1-D corridor. Action 1 moves right, action 0 moves left, the rest
// are distractor no-ops. Reaching the rightmost cell pays +1 and ends the
// episode; start position is drawn per level. Observation: one-hot position.
// ---------------------------------------------------------------------------
class ChainEnv final : public EnvInstance {
 public:
  explicit ChainEnv(const EnvParams& params) {
    check_keys(params, {"length", "max_steps", "actions"}, "chain");
    length_ = static_cast<int>(get_param(params, "length", 16));
    if (length_ < 2) throw ConfigError("chain: length must be >= 2");
    spec_.name = "chain";
    spec_.obs_dim = length_;
    spec_.action_count = static_cast<int>(get_param(params, "actions", 4));
    if (spec_.action_count < 2) throw ConfigError("chain: actions must be >= 2");
    spec_.max_episode_len =
        static_cast<int>(get_param(params, "max_steps", 4 * length_));
  }

  const EnvSpec& spec() const override { return spec_; }

  void reset(std::uint64_t level_seed) override {
    Rng rng(level_seed);
    pos_ = static_cast<int>(rng.below(static_cast<std::uint64_t>(length_ - 1)));
    steps_ = 0;
  }

  double step(int action, bool& done) override {
    if (action == 0)
      pos_ = std::max(0, pos_ - 1);
    else if (action == 1)
      pos_ = std::min(length_ - 1, pos_ + 1);
    ++steps_;
    done = false;
    double reward = 0.0;
    if (pos_ == length_ - 1) {
      reward = 1.0;
      done = true;
    }
    if (steps_ >= spec_.max_episode_len) done = true;
    return reward;
  }

  void observe(double* out) const override {
    std::memset(out, 0, sizeof(double) * static_cast<std::size_t>(length_));
    out[pos_] = 1.0;
  }

 private:
  EnvSpec spec_;
  int length_ = 16;
  int pos_ = 0;
  int steps_ = 0;
};

// ---------------------------------------------------------------------------
// bandit: single-step episodes, constant observation. Action 0 pays +1,
// every other action pays 0. The sanity env for policy-gradient sign checks.
// ---------------------------------------------------------------------------
class BanditEnv final : public EnvInstance {
 public:
  explicit BanditEnv(const EnvParams& params) {
    check_keys(params, {"actions"}, "bandit");
    spec_.name = "bandit";
    spec_.obs_dim = 1;
    spec_.action_count = static_cast<int>(get_param(params, "actions", 2));
    if (spec_.action_count < 2) throw ConfigError("bandit: actions must be >= 2");
    spec_.max_episode_len = 1;
  }

  const EnvSpec& spec() const override { return spec_; }
  void reset(std::uint64_t) override {}

  double step(int action, bool& done) override {
    done = true;
    return action == 0 ? 1.0 : 0.0;
  }

  void observe(double* out) const override { out[0] = 1.0; }

 private:
  EnvSpec spec_;
};

}  // namespace

std::unique_ptr<EnvInstance> make_env_instance(const std::string& name,
                                               const EnvParams& params) {
  if (name == "keydoor") return std::make_unique<KeydoorEnv>(params);
  if (name == "chain") return std::make_unique<ChainEnv>(params);
  if (name == "bandit") return std::make_unique<BanditEnv>(params);
  throw ConfigError("unknown env '" + name +
                    "' (available: keydoor, chain, bandit)");
}

VecEnv::VecEnv(const std::string& name, int num_envs, std::uint64_t seed,
               const EnvParams& params) {
  if (num_envs < 1) throw ConfigError("num_envs must be >= 1");
  instances_.reserve(static_cast<std::size_t>(num_envs));
  for (int i = 0; i < num_envs; ++i) {
    Slot s;
    s.env = make_env_instance(name, params);
    s.rng = Rng(stream_seed(seed, 0x1000 + static_cast<std::uint64_t>(i)));
    instances_.push_back(std::move(s));
  }
  spec_ = instances_.front().env->spec();
  last_obs_ = Matd::Zero(num_envs, spec_.obs_dim);
}

void VecEnv::reset_instance(Slot& s) {
  s.level_seed = s.rng.bits();
  s.env->reset(s.level_seed);
  s.ep_return = 0.0;
  s.ep_len = 0;
}

Matd VecEnv::reset() {
  for (int i = 0; i < num_envs(); ++i) {
    auto& s = instances_[static_cast<std::size_t>(i)];
    reset_instance(s);
    s.env->observe(last_obs_.row(i).data());
  }
  return last_obs_;
}

void VecEnv::step(const std::vector<int>& actions, Matd& obs, Vecd& rewards,
                  std::vector<std::uint8_t>& dones,
                  std::vector<EpisodeResult>* completed) {
  const int w = num_envs();
  require_shape(static_cast<int>(actions.size()) == w, "VecEnv::step actions");
  obs.resize(w, spec_.obs_dim);
  rewards.resize(w);
  dones.assign(static_cast<std::size_t>(w), 0);
  for (int i = 0; i < w; ++i) {
    auto& s = instances_[static_cast<std::size_t>(i)];
    const int a = actions[static_cast<std::size_t>(i)];
    if (a < 0 || a >= spec_.action_count)
      throw std::out_of_range("env instance " + std::to_string(i) + ": action " +
                              std::to_string(a) + " out of range [0, " +
                              std::to_string(spec_.action_count) + ")");
    bool done = false;
    const double r = s.env->step(a, done);
    s.ep_return += r;
    s.ep_len += 1;
    rewards(i) = r;
    dones[static_cast<std::size_t>(i)] = done ? 1 : 0;
    if (done) {
      if (completed)
        completed->push_back(EpisodeResult{i, s.ep_return, s.ep_len});
      reset_instance(s);
    }
    s.env->observe(obs.row(i).data());
  }
  last_obs_ = obs;
}

}  // namespace ppg
