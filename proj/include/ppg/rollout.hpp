#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ppg/advantage.hpp"
#include "ppg/common.hpp"
#include "ppg/distributions.hpp"
#include "ppg/env.hpp"
#include "ppg/nets.hpp"
#include "ppg/rng.hpp"

namespace ppg {

/// Which head produces V(s) during collection.
enum class ValueSource { DualNet, AuxHead, TrueHead };

/// One fixed-horizon on-policy batch. Flat arrays hold W*T transitions in
/// env-major order (row w*T + t); all values are stored in double no matter
/// what precision the networks run at.
struct RolloutBatch {
  int num_envs = 0;
  int horizon = 0;
  int obs_dim = 0;
  int action_count = 0;

  Matd obs;                          // [(W*T) x D]
  std::vector<int> actions;          // W*T
  Vecd rewards_raw;                  // W*T
  Vecd rewards;                      // W*T, normalized when enabled
  std::vector<std::uint8_t> dones;   // W*T
  Vecd logp_old;                     // W*T, captured at sampling time
  Matd logits_old;                   // [(W*T) x A]
  Vecd values;                       // W*T, V(s_t)
  Vecd bootstrap_values;             // W, V(s_T)
  Vecd advantages;                   // W*T, filled by apply_gae
  Vecd targets;                      // W*T
  double raw_adv_std = 0.0;          // before any normalization

  std::vector<EpisodeResult> completed_episodes;

  Eigen::Index size() const { return static_cast<Eigen::Index>(num_envs) * horizon; }

  /// Reshape helpers between flat [W*T] vectors and [W x T] matrices.
  Matd unflatten(const Vecd& flat) const;
  static Vecd flatten(const Matd& m);

  /// Runs GAE (and optional batch-level advantage normalization) in place.
  void apply_gae(const GaeConfig& cfg, AdvNorm norm);

  /// Binary dump for offline inspection; see docs/file_formats.md.
  void save(const std::string& path) const;
  static RolloutBatch load(const std::string& path);
};

/// Collects exactly W*T transitions under the current policy, sampling from
/// the categorical head without gradient recording. Old log-probs and full
/// logits are captured before any optimization epoch. The reward normalizer,
/// when given, is updated online step by step.
template <class S>
RolloutBatch collect(VecEnv& env, const PolicyNet<S>& policy,
                     const ValueNet<S>* value_net, ValueSource source,
                     RewardNormalizer* normalizer, int horizon, Rng& rng) {
  const int w = env.num_envs();
  const int t_len = horizon;
  const int d = env.spec().obs_dim;
  const int a_count = env.spec().action_count;
  require_shape(policy.obs_dim() == d, "collect: policy obs dim vs env");
  if (source == ValueSource::DualNet)
    require_shape(value_net != nullptr, "collect: dual-net source needs a ValueNet");
  if (source == ValueSource::TrueHead)
    require_shape(policy.has_true_value_head(),
                  "collect: true-head source needs the single-net policy");

  RolloutBatch b;
  b.num_envs = w;
  b.horizon = t_len;
  b.obs_dim = d;
  b.action_count = a_count;
  b.obs.resize(static_cast<Eigen::Index>(w) * t_len, d);
  b.actions.resize(static_cast<std::size_t>(w) * t_len);
  b.rewards_raw.resize(static_cast<Eigen::Index>(w) * t_len);
  b.rewards.resize(static_cast<Eigen::Index>(w) * t_len);
  b.dones.resize(static_cast<std::size_t>(w) * t_len);
  b.logp_old.resize(static_cast<Eigen::Index>(w) * t_len);
  b.logits_old.resize(static_cast<Eigen::Index>(w) * t_len, a_count);
  b.values.resize(static_cast<Eigen::Index>(w) * t_len);
  b.bootstrap_values.resize(w);

  Matd obs = env.last_obs();
  Matd next_obs;
  Vecd step_rewards;
  std::vector<std::uint8_t> step_dones;

  auto value_of = [&](const Mat<S>& o, const typename PolicyNet<S>::Out& pout) -> Vec<S> {
    switch (source) {
      case ValueSource::DualNet:
        return value_net->forward(o);
      case ValueSource::AuxHead:
        return pout.aux_value;
      case ValueSource::TrueHead:
        return *pout.true_value;
    }
    return Vec<S>();
  };

  for (int k = 0; k < t_len; ++k) {
    const Mat<S> obs_s = obs.template cast<S>();
    const auto pout = policy.forward(obs_s);
    CategoricalDist<S> dist{pout.logits};
    const std::vector<int> acts = dist.sample(rng);
    const Vec<S> lp = dist.log_prob(acts);
    const Vec<S> vals = value_of(obs_s, pout);

    env.step(acts, next_obs, step_rewards, step_dones, &b.completed_episodes);

    Vecd scaled = normalizer ? normalizer->normalize_step(step_rewards, step_dones)
                             : step_rewards;
    for (int i = 0; i < w; ++i) {
      const Eigen::Index row = static_cast<Eigen::Index>(i) * t_len + k;
      b.obs.row(row) = obs.row(i);
      b.actions[static_cast<std::size_t>(row)] = acts[static_cast<std::size_t>(i)];
      b.rewards_raw(row) = step_rewards(i);
      b.rewards(row) = scaled(i);
      b.dones[static_cast<std::size_t>(row)] = step_dones[static_cast<std::size_t>(i)];
      b.logp_old(row) = static_cast<double>(lp(i));
      b.logits_old.row(row) = pout.logits.row(i).template cast<double>();
      b.values(row) = static_cast<double>(vals(i));
    }
    obs = next_obs;
  }

  const Mat<S> obs_s = obs.template cast<S>();
  const auto pout = policy.forward(obs_s);
  const Vec<S> vals = value_of(obs_s, pout);
  for (int i = 0; i < w; ++i) b.bootstrap_values(i) = static_cast<double>(vals(i));
  return b;
}

/// Uniformly shuffled partition of [0, batch_size) into k equal index sets;
/// every transition appears exactly once. k must divide the batch size.
std::vector<std::vector<int>> minibatch_indices(Eigen::Index batch_size, int k,
                                                Rng& rng);

/// The auxiliary-phase buffer B of stored rollouts: (s_t, Vtarg_t) pairs,
/// plus the full frozen policy distributions computed once after the last
/// policy update of the phase.
class ReplayBuffer {
 public:
  void clear();
  void add(Matd obs, Vecd targets);

  /// Computes and stores pi_old(.|s) logits for every stored state. Must be
  /// called exactly once per phase, after at least one add().
  template <class S>
  void freeze_policy(const PolicyNet<S>& policy) {
    if (rollouts_.empty())
      throw ContractError("ReplayBuffer::freeze_policy before any add");
    if (frozen_)
      throw ContractError("ReplayBuffer::freeze_policy called twice in one phase");
    frozen_logits_.resize(size(), policy.num_actions());
    Eigen::Index at = 0;
    for (const auto& r : rollouts_) {
      const auto out = policy.forward(r.obs.template cast<S>());
      frozen_logits_.middleRows(at, r.obs.rows()) =
          out.logits.template cast<double>();
      at += r.obs.rows();
    }
    frozen_ = true;
  }

  bool frozen() const { return frozen_; }
  std::size_t num_rollouts() const { return rollouts_.size(); }
  Eigen::Index size() const;  // stored states

  /// Gathers one minibatch by flat index.
  void gather(const std::vector<int>& idx, Matd& obs, Vecd& targets,
              Matd& frozen_logits) const;

  /// Bitwise checksum over the stored value targets; used to assert they
  /// stay fixed through the auxiliary phase.
  std::uint64_t target_checksum() const;

 private:
  struct Stored {
    Matd obs;
    Vecd targets;
  };
  std::vector<Stored> rollouts_;
  Matd frozen_logits_;
  bool frozen_ = false;
};

}  // namespace ppg
