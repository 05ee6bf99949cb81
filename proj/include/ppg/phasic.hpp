#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ppg/advantage.hpp"
#include "ppg/checkpoint.hpp"
#include "ppg/common.hpp"
#include "ppg/env.hpp"
#include "ppg/metrics.hpp"
#include "ppg/nets.hpp"
#include "ppg/rollout.hpp"
#include "ppg/tape.hpp"

namespace ppg {

/// Exactly one variant is active; it fully determines the loss wiring.
///   PpgDual       two networks, clipped surrogate, auxiliary phase
///   PpgSingleNet  one network, value gradient detached in the policy phase
///   PpgKlPenalty  clip term replaced by the fixed-KL-penalty objective
///   PpgNoAuxValue aux phase skips the value loss (value epochs raised)
///   PpoShared     PPO baseline, one network, combined loss, no aux phase
///   PpoSeparate   PPO with disjoint networks, no aux phase
enum class Variant {
  PpgDual,
  PpgSingleNet,
  PpgKlPenalty,
  PpgNoAuxValue,
  PpoShared,
  PpoSeparate,
};

const char* variant_name(Variant v);
Variant parse_variant(const std::string& name);
inline bool variant_has_aux_phase(Variant v) {
  return v == Variant::PpgDual || v == Variant::PpgSingleNet ||
         v == Variant::PpgKlPenalty || v == Variant::PpgNoAuxValue;
}
inline bool variant_has_value_net(Variant v) {
  return v != Variant::PpgSingleNet && v != Variant::PpoShared;
}

struct Hyperparameters {
  int n_pi = 32;
  int e_pi = 1;
  int e_v = 1;
  int e_aux = 6;
  int minibatches_per_epoch = 8;
  int aux_minibatches_per_npi = 16;
  int horizon = 256;
  double gamma = 0.999;
  double lambda = 0.95;
  double beta_clone = 1.0;
  double beta_s = 0.01;
  double clip_eps = 0.2;
  double beta_pi = 1.0;
  double vf_coef = 0.5;
  double lr = 5e-4;
  AdamConfig adam;
  double max_grad_norm = 0.0;  // 0 disables clipping
  bool reward_norm = true;
  AdvNorm adv_norm = AdvNorm::Batch;
  std::int64_t total_steps = 2'000'000;
  int num_envs = 16;
  std::vector<int> hidden = {64, 64};
};

struct TrainerOptions {
  Hyperparameters hp;
  Variant variant = Variant::PpgDual;
  std::string env_name = "keydoor";
  EnvParams env_params;
  std::uint64_t seed = 0;
  std::string out_dir;        // empty: no checkpoints / rollout dumps
  int checkpoint_every = 0;   // phase pairs between checkpoints; 0 = final only
  int dump_rollout_every = 0; // policy iterations between dumps; 0 = off
};

/// The PPG trainer (and its PPO baselines): alternates the policy phase and
/// the auxiliary phase until the step budget is reached. Fully deterministic
/// for a given (options, seed).
template <class S>
class Trainer {
 public:
  explicit Trainer(const TrainerOptions& opts, RowSink sink = {})
      : opts_(opts),
        hp_(opts.hp),
        env_(opts.env_name, opts.hp.num_envs, opts.seed, opts.env_params),
        sample_rng_(stream_seed(opts.seed, 1)),
        shuffle_rng_(stream_seed(opts.seed, 2)),
        sink_(std::move(sink)) {
    Rng init_rng(stream_seed(opts.seed, 3));
    const bool single_net = opts.variant == Variant::PpgSingleNet;
    policy_.emplace(env_.spec().obs_dim, env_.spec().action_count, hp_.hidden,
                    single_net, init_rng);
    policy_opt_ = Adam<S>(policy_->params(), hp_.adam);
    if (variant_has_value_net(opts.variant)) {
      Rng vrng(stream_seed(opts.seed, 4));
      value_.emplace(env_.spec().obs_dim, hp_.hidden, vrng);
      value_opt_ = Adam<S>(value_->params(), hp_.adam);
    }
    if (hp_.reward_norm)
      normalizer_.emplace(hp_.num_envs, hp_.gamma);
    validate();
    env_.reset();
  }

  /// Outer loop of the algorithm: runs phase pairs until total_steps env
  /// steps have been consumed. The final phase pair always completes.
  void run() {
    while (env_steps_ < hp_.total_steps) {
      run_policy_phase();
      if (variant_has_aux_phase(opts_.variant)) {
        buffer_.freeze_policy(*policy_);
        run_auxiliary_phase();
        buffer_.clear();
      }
      flush_pending_row();
      ++phase_;
      if (!opts_.out_dir.empty() && opts_.checkpoint_every > 0 &&
          phase_ % opts_.checkpoint_every == 0)
        save_checkpoint(checkpoint_path(phase_));
    }
    if (!opts_.out_dir.empty()) save_checkpoint(opts_.out_dir + "/final.ppgckpt");
  }

  /// N_pi policy iterations: rollout, GAE, policy epochs, value epochs,
  /// buffer add. For the PPO variants this is just N_pi PPO updates.
  void run_policy_phase() {
    if (variant_has_aux_phase(opts_.variant)) buffer_.clear();
    for (int n = 0; n < hp_.n_pi; ++n) policy_iteration();
  }

  /// E_aux epochs over all data in the buffer; each epoch is
  /// aux_minibatches_per_npi * N_pi minibatches spanning the whole buffer.
  void run_auxiliary_phase() {
    if (!buffer_.frozen())
      throw ContractError("auxiliary phase requires a frozen buffer");
    double joint_acc = 0, mse_acc = 0, kl_acc = 0, value_acc = 0;
    std::int64_t updates = 0;
    const int k = hp_.aux_minibatches_per_npi *
                  static_cast<int>(buffer_.num_rollouts());
    checkpoint_on_numeric_error([&] {
    for (int epoch = 0; epoch < hp_.e_aux; ++epoch) {
      const auto sets = minibatch_indices(buffer_.size(), k, shuffle_rng_);
      for (const auto& idx : sets) {
        Matd obs_d;
        Vecd targ_d;
        Matd frozen_d;
        buffer_.gather(idx, obs_d, targ_d, frozen_d);
        const Mat<S> obs = obs_d.template cast<S>();
        const Vec<S> targ = targ_d.template cast<S>();
        const Mat<S> frozen = frozen_d.template cast<S>();

        Tape<S> tape;
        auto out = policy_->forward_tape(tape, obs, /*detach=*/false);
        const int mse = tape.half_mse_mean(out.aux_value, targ);
        const int kl = tape.kl_mean(frozen, out.logits);
        std::vector<std::pair<S, int>> terms = {
            {S(1), mse}, {static_cast<S>(hp_.beta_clone), kl}};
        if (opts_.variant == Variant::PpgSingleNet) {
          const int vmse = tape.half_mse_mean(out.true_value, targ);
          terms.push_back({S(1), vmse});
          value_acc += tape.value(vmse);
        }
        const int loss = tape.weighted_sum(std::move(terms));
        const double joint = tape.value(mse) +
                             hp_.beta_clone * tape.value(kl);
        check_finite_loss(joint, "L^joint");
        tape.backward(loss);
        Adam<S>::clip_global_norm(policy_->params(), hp_.max_grad_norm);
        policy_opt_.step(policy_->params(), hp_.lr);

        joint_acc += joint;
        mse_acc += tape.value(mse);
        kl_acc += tape.value(kl);

        if (value_ && opts_.variant != Variant::PpgNoAuxValue) {
          Tape<S> vtape;
          const int v = value_->forward_tape(vtape, obs);
          const int vloss = vtape.half_mse_mean(v, targ);
          check_finite_loss(vtape.value(vloss), "L^value (aux phase)");
          vtape.backward(vloss);
          Adam<S>::clip_global_norm(value_->params(), hp_.max_grad_norm);
          value_opt_.step(value_->params(), hp_.lr);
          value_acc += vtape.value(vloss);
        }
        ++updates;
      }
    }
    });
    if (pending_row_ && updates > 0) {
      pending_row_->aux_joint = joint_acc / static_cast<double>(updates);
      pending_row_->aux_mse = mse_acc / static_cast<double>(updates);
      pending_row_->aux_clone_kl = kl_acc / static_cast<double>(updates);
      if (opts_.variant != Variant::PpgNoAuxValue)
        pending_row_->aux_value = value_acc / static_cast<double>(updates);
    }
  }

  PolicyNet<S>& policy() { return *policy_; }
  ValueNet<S>* value_net() { return value_ ? &*value_ : nullptr; }
  Adam<S>& policy_optimizer() { return policy_opt_; }
  Adam<S>& value_optimizer() { return value_opt_; }
  ReplayBuffer& buffer() { return buffer_; }
  VecEnv& env() { return env_; }
  RewardNormalizer* normalizer() { return normalizer_ ? &*normalizer_ : nullptr; }
  std::int64_t env_steps() const { return env_steps_; }
  std::int64_t iteration() const { return iter_; }
  const TrainerOptions& options() const { return opts_; }

  ValueSource value_source() const {
    if (opts_.variant == Variant::PpgSingleNet) return ValueSource::TrueHead;
    if (opts_.variant == Variant::PpoShared) return ValueSource::AuxHead;
    return ValueSource::DualNet;
  }

  void save_checkpoint(const std::string& path) {
    std::vector<CheckpointSection<S>> sections;
    sections.push_back({"policy", &policy_->params(), &policy_opt_});
    if (value_) sections.push_back({"value", &value_->params(), &value_opt_});
    ppg::save_checkpoint<S>(path, env_steps_, iter_, sections);
  }

 private:
  void validate() const {
    const Eigen::Index batch =
        static_cast<Eigen::Index>(hp_.num_envs) * hp_.horizon;
    if (hp_.n_pi < 1) throw ConfigError("n_pi must be >= 1");
    if (hp_.e_pi < 0 || hp_.e_v < 0 || hp_.e_aux < 0)
      throw ConfigError("epoch counts must be >= 0");
    if (batch % hp_.minibatches_per_epoch != 0)
      throw ConfigError("minibatches_per_epoch (" +
                        std::to_string(hp_.minibatches_per_epoch) +
                        ") must divide the rollout batch size (" +
                        std::to_string(batch) + ")");
    if (variant_has_aux_phase(opts_.variant) &&
        batch % hp_.aux_minibatches_per_npi != 0)
      throw ConfigError("aux_minibatches_per_npi (" +
                        std::to_string(hp_.aux_minibatches_per_npi) +
                        ") must divide the per-iteration batch size (" +
                        std::to_string(batch) + ")");
    if (hp_.clip_eps <= 0.0 || hp_.clip_eps >= 1.0)
      throw ConfigError("clip_eps must be in (0, 1)");
    if (hp_.gamma <= 0.0 || hp_.gamma > 1.0)
      throw ConfigError("gamma must be in (0, 1]");
    if (hp_.lambda < 0.0 || hp_.lambda > 1.0)
      throw ConfigError("lambda must be in [0, 1]");
    if (hp_.beta_pi < 0.0) throw ConfigError("beta_pi must be >= 0");
  }

  void policy_iteration() {
    RolloutBatch batch =
        collect<S>(env_, *policy_, value_ ? &*value_ : nullptr, value_source(),
                   normalizer_ ? &*normalizer_ : nullptr, hp_.horizon,
                   sample_rng_);
    env_steps_ += batch.size();
    ++iter_;

    batch.apply_gae(GaeConfig{hp_.gamma, hp_.lambda},
                    hp_.adv_norm == AdvNorm::Batch ? AdvNorm::Batch : AdvNorm::Off);

    if (opts_.dump_rollout_every > 0 && !opts_.out_dir.empty() &&
        iter_ % opts_.dump_rollout_every == 0) {
      std::filesystem::create_directories(opts_.out_dir + "/rollouts");
      char name[64];
      std::snprintf(name, sizeof(name), "/rollouts/iter_%08lld.bin",
                    static_cast<long long>(iter_));
      batch.save(opts_.out_dir + name);
    }

    double lp_acc = 0, lv_acc = 0, clip_acc = 0;
    std::int64_t p_updates = 0, v_updates = 0;
    const bool shared = opts_.variant == Variant::PpoShared;
    checkpoint_on_numeric_error([&] {
      for (int epoch = 0; epoch < hp_.e_pi; ++epoch) {
        const auto sets = minibatch_indices(batch.size(),
                                            hp_.minibatches_per_epoch, shuffle_rng_);
        for (const auto& idx : sets) {
          const auto stats = policy_minibatch_step(batch, idx);
          lp_acc += stats.loss_policy;
          clip_acc += stats.clip_fraction;
          lv_acc += stats.loss_value;
          ++p_updates;
        }
      }
      if (!shared) {
        for (int epoch = 0; epoch < hp_.e_v; ++epoch) {
          const auto sets = minibatch_indices(
              batch.size(), hp_.minibatches_per_epoch, shuffle_rng_);
          for (const auto& idx : sets) {
            lv_acc += value_minibatch_step(batch, idx);
            ++v_updates;
          }
        }
      }
    });

    emit_row(batch, lp_acc, lv_acc, clip_acc, p_updates,
             shared ? p_updates : v_updates);

    if (variant_has_aux_phase(opts_.variant))
      buffer_.add(std::move(batch.obs), std::move(batch.targets));
  }

  struct StepStats {
    double loss_policy = 0;
    double loss_value = 0;
    double clip_fraction = 0;
  };

  StepStats policy_minibatch_step(const RolloutBatch& batch,
                                  const std::vector<int>& idx) {
    const Eigen::Index b = static_cast<Eigen::Index>(idx.size());
    Mat<S> obs(b, batch.obs_dim);
    std::vector<int> actions(idx.size());
    Vec<S> logp_old(b), adv_s(b), targ(b);
    Vecd adv_d(b);
    Mat<S> old_logits(b, batch.action_count);
    for (Eigen::Index j = 0; j < b; ++j) {
      const Eigen::Index row = idx[static_cast<std::size_t>(j)];
      obs.row(j) = batch.obs.row(row).template cast<S>();
      actions[static_cast<std::size_t>(j)] = batch.actions[static_cast<std::size_t>(row)];
      logp_old(j) = static_cast<S>(batch.logp_old(row));
      adv_d(j) = batch.advantages(row);
      targ(j) = static_cast<S>(batch.targets(row));
      old_logits.row(j) = batch.logits_old.row(row).template cast<S>();
    }
    if (hp_.adv_norm == AdvNorm::Minibatch) normalize_advantages(adv_d);
    adv_s = adv_d.template cast<S>();

    Tape<S> tape;
    auto out = policy_->forward_tape(tape, obs,
                                     opts_.variant == Variant::PpgSingleNet);
    const int lp = tape.gather_log_prob(out.logits, actions);
    const int ent = tape.entropy_mean(out.logits);

    StepStats stats;
    int loss = -1;
    ClipStats cstats;
    if (opts_.variant == Variant::PpgKlPenalty) {
      const int surr = tape.ratio_adv_mean(lp, logp_old, adv_s);
      const int kl = tape.kl_mean(old_logits, out.logits);
      loss = tape.weighted_sum({{S(-1), surr},
                                {static_cast<S>(hp_.beta_pi), kl},
                                {static_cast<S>(-hp_.beta_s), ent}});
      stats.loss_policy = -tape.value(surr) + hp_.beta_pi * tape.value(kl);
    } else if (opts_.variant == Variant::PpoShared) {
      const int clip = tape.clip_surrogate_mean(
          lp, logp_old, adv_s, static_cast<S>(hp_.clip_eps), &cstats);
      const int vmse = tape.half_mse_mean(out.aux_value, targ);
      loss = tape.weighted_sum({{S(-1), clip},
                                {static_cast<S>(-hp_.beta_s), ent},
                                {static_cast<S>(hp_.vf_coef), vmse}});
      stats.loss_policy = -tape.value(clip);
      stats.loss_value = tape.value(vmse);
      stats.clip_fraction = cstats.clip_fraction;
    } else {
      const int clip = tape.clip_surrogate_mean(
          lp, logp_old, adv_s, static_cast<S>(hp_.clip_eps), &cstats);
      loss = tape.weighted_sum({{S(-1), clip}, {static_cast<S>(-hp_.beta_s), ent}});
      stats.loss_policy = -tape.value(clip);
      stats.clip_fraction = cstats.clip_fraction;
    }
    check_finite_loss(tape.value(loss), "policy loss", &old_logits, &out, &tape);
    tape.backward(loss);
    Adam<S>::clip_global_norm(policy_->params(), hp_.max_grad_norm);
    policy_opt_.step(policy_->params(), hp_.lr);
    return stats;
  }

  double value_minibatch_step(const RolloutBatch& batch,
                              const std::vector<int>& idx) {
    const Eigen::Index b = static_cast<Eigen::Index>(idx.size());
    Mat<S> obs(b, batch.obs_dim);
    Vec<S> targ(b);
    for (Eigen::Index j = 0; j < b; ++j) {
      const Eigen::Index row = idx[static_cast<std::size_t>(j)];
      obs.row(j) = batch.obs.row(row).template cast<S>();
      targ(j) = static_cast<S>(batch.targets(row));
    }
    Tape<S> tape;
    int pred = -1;
    ParameterSet<S>* params = nullptr;
    Adam<S>* opt = nullptr;
    if (opts_.variant == Variant::PpgSingleNet) {
      // Detached torso: the value loss reaches only the head's own linears.
      auto out = policy_->forward_tape(tape, obs, /*detach=*/true);
      pred = out.true_value;
      params = &policy_->params();
      opt = &policy_opt_;
    } else {
      pred = value_->forward_tape(tape, obs);
      params = &value_->params();
      opt = &value_opt_;
    }
    const int loss = tape.half_mse_mean(pred, targ);
    const double lval = tape.value(loss);
    check_finite_loss(lval, "L^value");
    tape.backward(loss);
    Adam<S>::clip_global_norm(*params, hp_.max_grad_norm);
    opt->step(*params, hp_.lr);
    return lval;
  }

  void emit_row(const RolloutBatch& batch, double lp_acc, double lv_acc,
                double clip_acc, std::int64_t p_updates, std::int64_t v_updates) {
    MetricsRow row;
    row.iter = iter_;
    row.env_steps = env_steps_;
    row.phase = phase_;
    row.episodes = static_cast<std::int64_t>(batch.completed_episodes.size());
    if (!batch.completed_episodes.empty()) {
      double ret = 0, len = 0;
      for (const auto& e : batch.completed_episodes) {
        ret += e.ret;
        len += e.length;
      }
      row.ep_ret_mean = ret / static_cast<double>(batch.completed_episodes.size());
      row.ep_len_mean = len / static_cast<double>(batch.completed_episodes.size());
    }
    if (p_updates > 0) {
      row.loss_policy = lp_acc / static_cast<double>(p_updates);
      if (opts_.variant != Variant::PpgKlPenalty)
        row.clip_frac = clip_acc / static_cast<double>(p_updates);
    }
    if (v_updates > 0) row.loss_value = lv_acc / static_cast<double>(v_updates);

    // Entropy of the collection-time distribution; exact KL(old || new) over
    // the full batch after this iteration's updates.
    CategoricalDist<S> old_dist{batch.logits_old.template cast<S>()};
    row.entropy = static_cast<double>(old_dist.entropy().mean());
    const auto new_out = policy_->forward(batch.obs.template cast<S>());
    CategoricalDist<S> new_dist{new_out.logits};
    row.kl = static_cast<double>(old_dist.kl(new_dist).mean());

    const double targ_mean = batch.targets.mean();
    const double targ_var =
        (batch.targets.array() - targ_mean).square().mean();
    const Vecd residual = batch.targets - batch.values;
    const double res_var =
        (residual.array() - residual.mean()).square().mean();
    row.explained_var = targ_var > 1e-12 ? 1.0 - res_var / targ_var : NAN;

    row.adv_std = batch.raw_adv_std;
    if (normalizer_) row.reward_scale = normalizer_->std_estimate();

    flush_pending_row();
    const bool last_of_phase =
        variant_has_aux_phase(opts_.variant) && (iter_ % hp_.n_pi == 0);
    if (last_of_phase)
      pending_row_ = row;  // aux metrics are filled in before emission
    else if (sink_)
      sink_(row);
  }

  void flush_pending_row() {
    if (pending_row_) {
      if (sink_) sink_(*pending_row_);
      pending_row_.reset();
    }
  }

  void check_finite_loss(double loss, const char* what,
                         const Mat<S>* old_logits = nullptr,
                         const typename PolicyNet<S>::TapeOut* out = nullptr,
                         const Tape<S>* tape = nullptr) {
    if (std::isfinite(loss)) return;
    std::string diag = std::string(what) + " is non-finite at iteration " +
                       std::to_string(iter_);
    if (old_logits && out && tape) {
      CategoricalDist<S> od{*old_logits};
      CategoricalDist<S> nd{tape->val(out->logits)};
      diag += "; mean KL(old || new) on the minibatch = " +
              std::to_string(static_cast<double>(od.kl(nd).mean()));
    }
    throw NumericError(diag);
  }

  /// On any non-finite loss or gradient: write a crash checkpoint, then
  /// propagate the abort.
  template <class F>
  void checkpoint_on_numeric_error(F&& body) {
    try {
      body();
    } catch (const NumericError&) {
      if (!opts_.out_dir.empty())
        save_checkpoint(opts_.out_dir + "/crash.ppgckpt");
      throw;
    }
  }

  TrainerOptions opts_;
  Hyperparameters hp_;
  VecEnv env_;
  std::optional<PolicyNet<S>> policy_;
  std::optional<ValueNet<S>> value_;
  Adam<S> policy_opt_;
  Adam<S> value_opt_;
  std::optional<RewardNormalizer> normalizer_;
  ReplayBuffer buffer_;
  Rng sample_rng_;
  Rng shuffle_rng_;
  RowSink sink_;
  std::optional<MetricsRow> pending_row_;
  std::int64_t env_steps_ = 0;
  std::int64_t iter_ = 0;
  std::int64_t phase_ = 0;

  std::string checkpoint_path(std::int64_t phase) const {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "/phase_%06lld.ppgckpt",
                  static_cast<long long>(phase));
    return opts_.out_dir + buf;
  }
};

}  // namespace ppg
