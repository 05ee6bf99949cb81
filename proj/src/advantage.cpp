#include "ppg/advantage.hpp"

#include <cmath>

namespace ppg {

GaeResult compute_gae(const Matd& rewards, const Matd& values,
                      const std::vector<std::uint8_t>& dones,
                      const GaeConfig& cfg) {
  const Eigen::Index w = rewards.rows();
  const Eigen::Index t = rewards.cols();
  require_shape(values.rows() == w && values.cols() == t + 1,
                "compute_gae: values must be [W x (T+1)]");
  require_shape(static_cast<Eigen::Index>(dones.size()) == w * t,
                "compute_gae: dones must have W*T entries");

  GaeResult out;
  out.advantages.resize(w, t);
  out.targets.resize(w, t);
  for (Eigen::Index i = 0; i < w; ++i) {
    double acc = 0.0;
    for (Eigen::Index k = t - 1; k >= 0; --k) {
      const double not_done =
          dones[static_cast<std::size_t>(i * t + k)] ? 0.0 : 1.0;
      const double delta = rewards(i, k) +
                           cfg.gamma * not_done * values(i, k + 1) -
                           values(i, k);
      acc = delta + cfg.gamma * cfg.lambda * not_done * acc;
      out.advantages(i, k) = acc;
      out.targets(i, k) = acc + values(i, k);
    }
  }
  return out;
}

void normalize_advantages(Vecd& adv) {
  const double mean = adv.mean();
  const double var =
      (adv.array() - mean).square().sum() / static_cast<double>(adv.size());
  const double denom = std::sqrt(var) + 1e-8;
  adv = ((adv.array() - mean) / denom).matrix();
}

RewardNormalizer::RewardNormalizer(int num_envs, double gamma)
    : gamma_(gamma), running_returns_(Vecd::Zero(num_envs)) {}

void RewardNormalizer::update_stats(const Vecd& returns) {
  // Chan et al. parallel update, merging this batch into the running pair.
  const double n = static_cast<double>(returns.size());
  const double batch_mean = returns.mean();
  const double batch_m2 = (returns.array() - batch_mean).square().sum();
  const double total = count_ + n;
  const double delta = batch_mean - mean_;
  mean_ += delta * n / total;
  m2_ += batch_m2 + delta * delta * count_ * n / total;
  count_ = total;
}

double RewardNormalizer::variance() const { return m2_ / count_; }

double RewardNormalizer::std_estimate() const { return std::sqrt(variance()); }

Vecd RewardNormalizer::normalize_step(const Vecd& rewards,
                                      const std::vector<std::uint8_t>& dones) {
  require_shape(rewards.size() == running_returns_.size() &&
                    static_cast<Eigen::Index>(dones.size()) == rewards.size(),
                "RewardNormalizer::normalize_step inputs");
  running_returns_ = gamma_ * running_returns_ + rewards;
  update_stats(running_returns_);
  const double denom = std::max(std_estimate(), 1e-8);
  Vecd scaled = rewards / denom;
  for (Eigen::Index i = 0; i < rewards.size(); ++i)
    if (dones[static_cast<std::size_t>(i)]) running_returns_(i) = 0.0;
  return scaled;
}

Matd RewardNormalizer::normalize_batch(const Matd& rewards,
                                       const std::vector<std::uint8_t>& dones_flat) {
  const Eigen::Index w = rewards.rows();
  const Eigen::Index t = rewards.cols();
  require_shape(static_cast<Eigen::Index>(dones_flat.size()) == w * t,
                "RewardNormalizer::normalize_batch dones");
  Matd out(w, t);
  std::vector<std::uint8_t> step_dones(static_cast<std::size_t>(w));
  for (Eigen::Index k = 0; k < t; ++k) {
    for (Eigen::Index i = 0; i < w; ++i)
      step_dones[static_cast<std::size_t>(i)] =
          dones_flat[static_cast<std::size_t>(i * t + k)];
    out.col(k) = normalize_step(rewards.col(k), step_dones);
  }
  return out;
}

}  // namespace ppg
