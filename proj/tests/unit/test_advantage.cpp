#include <doctest.h>

#include <bit>
#include <cmath>

#include "oracles.hpp"
#include "ppg/advantage.hpp"
#include "ppg/rng.hpp"

using namespace ppg;

namespace {

struct RandomBatch {
  Matd rewards, values;
  std::vector<std::uint8_t> dones;
};

RandomBatch random_batch(int w, int t, Rng& rng, double done_prob = 0.15) {
  RandomBatch b;
  b.rewards.resize(w, t);
  b.values.resize(w, t + 1);
  b.dones.resize(static_cast<std::size_t>(w * t));
  for (Eigen::Index i = 0; i < b.rewards.size(); ++i)
    b.rewards.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < b.values.size(); ++i)
    b.values.data()[i] = rng.normal();
  for (auto& d : b.dones) d = rng.uniform() < done_prob ? 1 : 0;
  return b;
}

}  // namespace

TEST_SUITE("advantage") {

TEST_CASE("single terminal step: delta equals the advantage and target") {
  Matd rewards(1, 1), values(1, 2);
  rewards << 1.0;
  values << 0.3, 123.0;  // bootstrap must be masked by the done flag
  const auto out = compute_gae(rewards, values, {1}, GaeConfig{0.999, 0.95});
  CHECK(out.advantages(0, 0) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(out.targets(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("lambda = 0 degenerates to the TD residual") {
  Rng rng(4);
  const auto b = random_batch(2, 8, rng);
  const GaeConfig cfg{0.99, 0.0};
  const auto out = compute_gae(b.rewards, b.values, b.dones, cfg);
  for (int i = 0; i < 2; ++i) {
    for (int k = 0; k < 8; ++k) {
      const double nd = b.dones[static_cast<std::size_t>(i * 8 + k)] ? 0.0 : 1.0;
      const double delta =
          b.rewards(i, k) + cfg.gamma * nd * b.values(i, k + 1) - b.values(i, k);
      CHECK(out.advantages(i, k) == doctest::Approx(delta).epsilon(1e-12));
    }
  }
}

TEST_CASE("random batches match the O(T^2) brute-force oracle") {
  Rng rng(2718);
  for (double lambda : {0.0, 0.5, 0.95, 1.0}) {
    for (int rep = 0; rep < 25; ++rep) {
      const int w = 1 + static_cast<int>(rng.below(4));
      const int t = 2 + static_cast<int>(rng.below(31));
      const auto b = random_batch(w, t, rng);
      const GaeConfig cfg{0.999, lambda};
      const auto got = compute_gae(b.rewards, b.values, b.dones, cfg);
      const Matd want =
          oracle::gae_bruteforce(b.rewards, b.values, b.dones, cfg.gamma, lambda);
      CHECK((got.advantages - want).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("lambda = 1 equals discounted return minus baseline") {
  Rng rng(99);
  const auto b = random_batch(3, 24, rng);
  const GaeConfig cfg{0.98, 1.0};
  const auto got = compute_gae(b.rewards, b.values, b.dones, cfg);
  const Matd returns =
      oracle::discounted_returns(b.rewards, b.values, b.dones, cfg.gamma);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 24; ++k)
      CHECK(got.advantages(i, k) ==
            doctest::Approx(returns(i, k) - b.values(i, k)).epsilon(1e-10));
}

TEST_CASE("advantages are affine-linear in rewards for fixed values/dones") {
  Rng rng(123);
  const auto base = random_batch(2, 12, rng);
  Matd r1 = base.rewards;
  Matd r2(2, 12);
  for (Eigen::Index i = 0; i < r2.size(); ++i) r2.data()[i] = rng.normal();
  const GaeConfig cfg{0.995, 0.9};
  auto adv = [&](const Matd& r) {
    return compute_gae(r, base.values, base.dones, cfg).advantages;
  };
  const Matd a0 = adv(Matd::Zero(2, 12));
  const Matd lhs = adv(2.0 * r1 + 3.0 * r2);
  const Matd rhs = a0 + 2.0 * (adv(r1) - a0) + 3.0 * (adv(r2) - a0);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("targets minus advantages reproduce values bitwise as computed") {
  Rng rng(7);
  const auto b = random_batch(2, 10, rng);
  const auto out = compute_gae(b.rewards, b.values, b.dones, GaeConfig{});
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 10; ++k) {
      const double reconstructed = out.advantages(i, k) + b.values(i, k);
      CHECK(std::bit_cast<std::uint64_t>(out.targets(i, k)) ==
            std::bit_cast<std::uint64_t>(reconstructed));
    }
}

TEST_CASE("shape mismatches are rejected") {
  Matd rewards(2, 4), values(2, 4);  // values must be T+1 wide
  rewards.setZero();
  values.setZero();
  CHECK_THROWS_AS(
      compute_gae(rewards, values, std::vector<std::uint8_t>(8, 0), GaeConfig{}),
      ConfigError);
}

TEST_CASE("constant zero rewards normalize to zero without blow-up") {
  RewardNormalizer norm(4, 0.99);
  const std::vector<std::uint8_t> no_done(4, 0);
  for (int t = 0; t < 200; ++t) {
    const Vecd out = norm.normalize_step(Vecd::Zero(4), no_done);
    CHECK(out.cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(std::isfinite(norm.std_estimate()));
}

TEST_CASE("normalized stream is invariant to input scale after warmup") {
  const double scales[2] = {1.0, 100.0};
  std::vector<std::vector<double>> tail(2);
  for (int which = 0; which < 2; ++which) {
    Rng rng(31415);  // same stream for both scales
    RewardNormalizer norm(8, 0.99);
    std::vector<std::uint8_t> dones(8);
    for (int t = 0; t < 1250; ++t) {  // 10k env steps total
      Vecd r(8);
      for (int i = 0; i < 8; ++i) {
        r(i) = scales[which] * rng.normal();
        dones[static_cast<std::size_t>(i)] = rng.uniform() < 0.02 ? 1 : 0;
      }
      const Vecd out = norm.normalize_step(r, dones);
      if (t >= 1150)
        for (int i = 0; i < 8; ++i) tail[which].push_back(out(i));
    }
  }
  for (std::size_t i = 0; i < tail[0].size(); ++i) {
    if (std::abs(tail[0][i]) < 1e-3) continue;
    CHECK(tail[1][i] == doctest::Approx(tail[0][i]).epsilon(0.05));
  }
}

TEST_CASE("gamma = 0 with unit-normal rewards drives the divisor to 1") {
  Rng rng(777);
  RewardNormalizer norm(8, 0.0);
  const std::vector<std::uint8_t> no_done(8, 0);
  for (int t = 0; t < 1250; ++t) {
    Vecd r(8);
    for (int i = 0; i < 8; ++i) r(i) = rng.normal();
    norm.normalize_step(r, no_done);
  }
  CHECK(norm.std_estimate() == doctest::Approx(1.0).epsilon(0.10));
}

TEST_CASE("advantage normalization helper centers and scales") {
  Rng rng(5);
  Vecd adv(512);
  for (int i = 0; i < 512; ++i) adv(i) = 3.0 + 2.5 * rng.normal();
  normalize_advantages(adv);
  CHECK(adv.mean() == doctest::Approx(0.0).epsilon(1e-9));
  const double var = adv.array().square().mean();
  CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-6));
}

}  // TEST_SUITE
