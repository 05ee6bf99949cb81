#pragma once

#include <cstdint>
#include <vector>

#include "ppg/common.hpp"

namespace ppg {

struct GaeConfig {
  double gamma = 0.999;
  double lambda = 0.95;
};

struct GaeResult {
  Matd advantages;  // [W x T]
  Matd targets;     // [W x T], advantages + values
};

/// GAE over a batch of fixed-horizon trajectories.
///   delta_t = r_t + gamma * (1 - done_t) * V(s_{t+1}) - V(s_t)
///   A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
///   Vtarg_t = A_t + V(s_t)
/// `values` carries the bootstrap column: [W x (T+1)]. A done step masks
/// both the bootstrap and the recursion, so nothing leaks across episode
/// boundaries (timeouts are treated as terminal).
GaeResult compute_gae(const Matd& rewards, const Matd& values,
                      const std::vector<std::uint8_t>& dones,
                      const GaeConfig& cfg);

enum class AdvNorm { Off, Batch, Minibatch };

/// In-place zero-mean/unit-std normalization (population std + 1e-8).
void normalize_advantages(Vecd& adv);

/// Scales rewards by the running standard deviation of per-instance
/// discounted returns, so that discounted returns have roughly unit
/// variance. Returns are accumulated as R <- gamma * R + r and reset when
/// an episode ends; the variance estimate starts from a unit prior that
/// washes out as samples accumulate. Rewards are scaled, never centered.
class RewardNormalizer {
 public:
  RewardNormalizer(int num_envs, double gamma);

  /// Updates the running statistics with this step's rewards and returns
  /// the scaled rewards: r / max(std, 1e-8).
  Vecd normalize_step(const Vecd& rewards, const std::vector<std::uint8_t>& dones);

  /// Column-by-column convenience wrapper over [W x T] batches.
  Matd normalize_batch(const Matd& rewards,
                       const std::vector<std::uint8_t>& dones_flat);

  double std_estimate() const;
  double variance() const;
  double count() const { return count_; }

 private:
  void update_stats(const Vecd& returns);

  double gamma_;
  Vecd running_returns_;
  double mean_ = 0.0;
  double m2_ = 1.0;  // variance * count; starts at the unit prior
  double count_ = 1.0;
};

}  // namespace ppg
