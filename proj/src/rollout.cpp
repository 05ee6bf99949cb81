#include "ppg/rollout.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

namespace ppg {

Matd RolloutBatch::unflatten(const Vecd& flat) const {
  require_shape(flat.size() == size(), "unflatten: length");
  Matd out(num_envs, horizon);
  for (int i = 0; i < num_envs; ++i)
    for (int k = 0; k < horizon; ++k)
      out(i, k) = flat(static_cast<Eigen::Index>(i) * horizon + k);
  return out;
}

Vecd RolloutBatch::flatten(const Matd& m) {
  Vecd out(m.rows() * m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) out(i * m.cols() + k) = m(i, k);
  return out;
}

void RolloutBatch::apply_gae(const GaeConfig& cfg, AdvNorm norm) {
  Matd values_wt(num_envs, horizon + 1);
  for (int i = 0; i < num_envs; ++i) {
    for (int k = 0; k < horizon; ++k)
      values_wt(i, k) = values(static_cast<Eigen::Index>(i) * horizon + k);
    values_wt(i, horizon) = bootstrap_values(i);
  }
  GaeResult g = compute_gae(unflatten(rewards), values_wt, dones, cfg);
  advantages = flatten(g.advantages);
  targets = flatten(g.targets);
  const double mean = advantages.mean();
  raw_adv_std = std::sqrt((advantages.array() - mean).square().mean());
  if (norm == AdvNorm::Batch) normalize_advantages(advantages);
}

namespace {

constexpr char kRolloutMagic[8] = {'P', 'P', 'G', 'R', 'O', 'L', 'L', '1'};

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_u64(std::FILE* f, std::uint64_t v) {
  std::fwrite(&v, sizeof(v), 1, f);
}

std::uint64_t read_u64(std::FILE* f) {
  std::uint64_t v = 0;
  if (std::fread(&v, sizeof(v), 1, f) != 1)
    throw NumericError("rollout file: truncated");
  return v;
}

void write_doubles(std::FILE* f, const double* p, std::size_t n) {
  std::fwrite(p, sizeof(double), n, f);
}

void read_doubles(std::FILE* f, double* p, std::size_t n) {
  if (std::fread(p, sizeof(double), n, f) != n)
    throw NumericError("rollout file: truncated");
}

}  // namespace

void RolloutBatch::save(const std::string& path) const {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw NumericError("cannot open '" + path + "' for writing");
  std::fwrite(kRolloutMagic, 1, sizeof(kRolloutMagic), f.get());
  write_u64(f.get(), static_cast<std::uint64_t>(num_envs));
  write_u64(f.get(), static_cast<std::uint64_t>(horizon));
  write_u64(f.get(), static_cast<std::uint64_t>(obs_dim));
  write_u64(f.get(), static_cast<std::uint64_t>(action_count));
  write_doubles(f.get(), obs.data(), static_cast<std::size_t>(obs.size()));
  for (int a : actions) write_u64(f.get(), static_cast<std::uint64_t>(a));
  write_doubles(f.get(), rewards_raw.data(), static_cast<std::size_t>(rewards_raw.size()));
  write_doubles(f.get(), rewards.data(), static_cast<std::size_t>(rewards.size()));
  std::fwrite(dones.data(), 1, dones.size(), f.get());
  write_doubles(f.get(), logp_old.data(), static_cast<std::size_t>(logp_old.size()));
  write_doubles(f.get(), logits_old.data(), static_cast<std::size_t>(logits_old.size()));
  write_doubles(f.get(), values.data(), static_cast<std::size_t>(values.size()));
  write_doubles(f.get(), bootstrap_values.data(),
                static_cast<std::size_t>(bootstrap_values.size()));
  write_doubles(f.get(), advantages.data(), static_cast<std::size_t>(advantages.size()));
  write_doubles(f.get(), targets.data(), static_cast<std::size_t>(targets.size()));
}

RolloutBatch RolloutBatch::load(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw NumericError("cannot open '" + path + "' for reading");
  char magic[8];
  if (std::fread(magic, 1, 8, f.get()) != 8 ||
      std::memcmp(magic, kRolloutMagic, 8) != 0)
    throw NumericError("'" + path + "' is not a rollout dump");
  RolloutBatch b;
  b.num_envs = static_cast<int>(read_u64(f.get()));
  b.horizon = static_cast<int>(read_u64(f.get()));
  b.obs_dim = static_cast<int>(read_u64(f.get()));
  b.action_count = static_cast<int>(read_u64(f.get()));
  const Eigen::Index n = b.size();
  b.obs.resize(n, b.obs_dim);
  read_doubles(f.get(), b.obs.data(), static_cast<std::size_t>(b.obs.size()));
  b.actions.resize(static_cast<std::size_t>(n));
  for (auto& a : b.actions) a = static_cast<int>(read_u64(f.get()));
  b.rewards_raw.resize(n);
  read_doubles(f.get(), b.rewards_raw.data(), static_cast<std::size_t>(n));
  b.rewards.resize(n);
  read_doubles(f.get(), b.rewards.data(), static_cast<std::size_t>(n));
  b.dones.resize(static_cast<std::size_t>(n));
  if (std::fread(b.dones.data(), 1, b.dones.size(), f.get()) != b.dones.size())
    throw NumericError("rollout file: truncated");
  b.logp_old.resize(n);
  read_doubles(f.get(), b.logp_old.data(), static_cast<std::size_t>(n));
  b.logits_old.resize(n, b.action_count);
  read_doubles(f.get(), b.logits_old.data(),
               static_cast<std::size_t>(b.logits_old.size()));
  b.values.resize(n);
  read_doubles(f.get(), b.values.data(), static_cast<std::size_t>(n));
  b.bootstrap_values.resize(b.num_envs);
  read_doubles(f.get(), b.bootstrap_values.data(),
               static_cast<std::size_t>(b.num_envs));
  b.advantages.resize(n);
  read_doubles(f.get(), b.advantages.data(), static_cast<std::size_t>(n));
  b.targets.resize(n);
  read_doubles(f.get(), b.targets.data(), static_cast<std::size_t>(n));
  return b;
}

std::vector<std::vector<int>> minibatch_indices(Eigen::Index batch_size, int k,
                                                Rng& rng) {
  if (k < 1 || batch_size % k != 0)
    throw ConfigError("minibatch count " + std::to_string(k) +
                      " does not divide batch size " + std::to_string(batch_size));
  std::vector<int> perm(static_cast<std::size_t>(batch_size));
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm.begin(), perm.end());
  const Eigen::Index chunk = batch_size / k;
  std::vector<std::vector<int>> out(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i)
    out[static_cast<std::size_t>(i)].assign(
        perm.begin() + i * chunk, perm.begin() + (i + 1) * chunk);
  return out;
}

void ReplayBuffer::clear() {
  rollouts_.clear();
  frozen_logits_.resize(0, 0);
  frozen_ = false;
}

void ReplayBuffer::add(Matd obs, Vecd targets) {
  require_shape(obs.rows() == targets.size(), "ReplayBuffer::add shapes");
  if (frozen_)
    throw ContractError("ReplayBuffer::add after freeze_policy");
  rollouts_.push_back(Stored{std::move(obs), std::move(targets)});
}

Eigen::Index ReplayBuffer::size() const {
  Eigen::Index n = 0;
  for (const auto& r : rollouts_) n += r.obs.rows();
  return n;
}

void ReplayBuffer::gather(const std::vector<int>& idx, Matd& obs, Vecd& targets,
                          Matd& frozen_logits) const {
  if (!frozen_)
    throw ContractError("ReplayBuffer::gather before freeze_policy");
  const Eigen::Index d = rollouts_.front().obs.cols();
  obs.resize(static_cast<Eigen::Index>(idx.size()), d);
  targets.resize(static_cast<Eigen::Index>(idx.size()));
  frozen_logits.resize(static_cast<Eigen::Index>(idx.size()), frozen_logits_.cols());
  // Flat index -> (rollout, row). Rollouts have equal sizes in practice but
  // this does not assume it.
  for (std::size_t j = 0; j < idx.size(); ++j) {
    Eigen::Index flat = idx[j];
    std::size_t r = 0;
    while (flat >= rollouts_[r].obs.rows()) {
      flat -= rollouts_[r].obs.rows();
      ++r;
    }
    obs.row(static_cast<Eigen::Index>(j)) = rollouts_[r].obs.row(flat);
    targets(static_cast<Eigen::Index>(j)) = rollouts_[r].targets(flat);
    frozen_logits.row(static_cast<Eigen::Index>(j)) =
        frozen_logits_.row(static_cast<Eigen::Index>(idx[j]));
  }
}

std::uint64_t ReplayBuffer::target_checksum() const {
  std::uint64_t acc = 0x9e3779b97f4a7c15ULL;
  for (const auto& r : rollouts_)
    for (Eigen::Index i = 0; i < r.targets.size(); ++i) {
      const std::uint64_t bits = std::bit_cast<std::uint64_t>(r.targets(i));
      acc = (acc ^ bits) * 0x100000001b3ULL;
    }
  return acc;
}

}  // namespace ppg
