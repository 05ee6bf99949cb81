// Acceptance suite: runs every criterion at its stated tolerance and prints
// one pass/fail line per criterion. Exit code 0 only if all executed
// criteria pass.
//
// Flags:
//   --only 1,2,5   run a subset (the rest are reported as SKIPPED and the
//                  suite fails unless every executed criterion passes)
//   --jobs N       parallel training runs for the directional experiments
//
// The directional experiments (7, 8) train 15 runs of 2M env steps and
// dominate the runtime (< 2 h on a desktop CPU).

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "ppg/config.hpp"
#include "ppg/gradcheck.hpp"
#include "ppg/harness.hpp"
#include "ppg/phasic.hpp"

using namespace ppg;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  int id;
  std::string name;
  std::function<bool(std::string&)> run;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

int g_jobs = 2;
fs::path g_out_root;

// ---------------------------------------------------------------------- 1
bool criterion_gradients(std::string& detail) {
  const auto results = run_gradient_checks(20, 1e-5, 1e-5);
  bool pass = true;
  double worst = 0.0;
  for (const auto& r : results) {
    pass = pass && r.pass;
    worst = std::max(worst, r.max_err);
  }
  detail = "6 losses x 20 instances, worst scaled error " + fmt(worst);
  return pass;
}

// ---------------------------------------------------------------------- 2
bool criterion_gae_oracle(std::string& detail) {
  Rng rng(20240901);
  double worst = 0.0;
  int count = 0;
  for (double lambda : {0.0, 0.5, 0.95, 1.0}) {
    for (int rep = 0; rep < 25; ++rep) {
      const int w = 1 + static_cast<int>(rng.below(4));
      const int t = 2 + static_cast<int>(rng.below(31));
      Matd rewards(w, t), values(w, t + 1);
      for (Eigen::Index i = 0; i < rewards.size(); ++i)
        rewards.data()[i] = rng.normal();
      for (Eigen::Index i = 0; i < values.size(); ++i)
        values.data()[i] = rng.normal();
      std::vector<std::uint8_t> dones(static_cast<std::size_t>(w * t));
      // Edge cases on the first reps: all-terminal and no-terminal masks.
      if (rep == 0)
        std::fill(dones.begin(), dones.end(), 1);
      else if (rep == 1)
        std::fill(dones.begin(), dones.end(), 0);
      else
        for (auto& d : dones) d = rng.uniform() < 0.2 ? 1 : 0;
      const GaeConfig cfg{0.999, lambda};
      const auto got = compute_gae(rewards, values, dones, cfg);
      const Matd want =
          oracle::gae_bruteforce(rewards, values, dones, cfg.gamma, lambda);
      worst = std::max(worst, (got.advantages - want).cwiseAbs().maxCoeff());
      ++count;
    }
  }
  detail = std::to_string(count) + " instances, worst abs error " + fmt(worst);
  return worst < 1e-10;
}

// ---------------------------------------------------------------------- 3
bool criterion_loss_values(std::string& detail) {
  int failures = 0;
  auto expect = [&](double got, double want) {
    if (std::abs(got - want) > 1e-9) ++failures;
  };
  Vecd lp0 = Vecd::Zero(1), lp(1), adv(1);
  adv << 2.0;
  expect(loss_clip<double>(lp0, lp0, adv, 0.2), 2.0);
  lp << std::log(1.5);
  adv << 1.0;
  expect(loss_clip<double>(lp, lp0, adv, 0.2), 1.2);
  lp << std::log(0.5);
  adv << -1.0;
  expect(loss_clip<double>(lp, lp0, adv, 0.2), -0.8);
  Vecd pred(2), targ(2);
  pred << 0.7, -0.3;
  expect(loss_value<double>(pred, pred), 0.0);
  pred << 0.0, 0.0;
  targ << 2.0, 4.0;
  expect(loss_value<double>(pred, targ), 5.0);
  Matd za(1, 2), zb(1, 2);
  za << 0.3, -0.4;
  CategoricalDist<double> da{za};
  expect(da.kl(da)(0), 0.0);
  za << 1000.0, 0.0;
  zb << 0.0, 0.0;
  CategoricalDist<double> sat{za}, uni{zb};
  expect(sat.kl(uni)(0), std::log(2.0));
  expect(entropy_bonus<double>(Matd::Zero(3, 4)), std::log(4.0));
  Matd frozen(2, 3);
  frozen << 0.1, -0.2, 0.3, 1.0, 0.0, -1.0;
  Vecd vt(2);
  vt << 0.4, -0.9;
  expect(loss_joint<double>(vt, vt, frozen, frozen, 1.0), 0.0);
  detail = "9 pinned values, tolerance 1e-9";
  return failures == 0;
}

// ---------------------------------------------------------------------- 4
TrainerOptions small_options(Variant variant, std::uint64_t seed) {
  TrainerOptions opts;
  opts.variant = variant;
  opts.env_name = "chain";
  opts.env_params = {{"length", 6}};
  opts.seed = seed;
  opts.hp.num_envs = 2;
  opts.hp.horizon = 16;
  opts.hp.n_pi = 2;
  opts.hp.e_aux = 2;
  opts.hp.minibatches_per_epoch = 2;
  opts.hp.aux_minibatches_per_npi = 4;
  opts.hp.hidden = {8};
  opts.hp.total_steps = 64;
  return opts;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i]))
      return false;
  return true;
}

std::vector<double> torso_values(PolicyNet<double>& net) {
  std::vector<double> out;
  auto& ps = net.params();
  for (int i = 0; i < ps.size(); ++i)
    if (net.is_torso_param(i))
      for (Eigen::Index j = 0; j < ps.at(i).value.size(); ++j)
        out.push_back(ps.at(i).value.data()[j]);
  return out;
}

bool criterion_decoupling(std::string& detail) {
  bool pass = true;
  {
    auto opts = small_options(Variant::PpgDual, 41);
    opts.hp.e_v = 0;
    Trainer<double> t(opts);
    const auto before = t.value_net()->params().flat_values();
    t.run_policy_phase();
    pass = pass && bitwise_equal(t.value_net()->params().flat_values(), before);
  }
  {
    auto opts = small_options(Variant::PpgDual, 42);
    opts.hp.e_pi = 0;
    Trainer<double> t(opts);
    const auto before = t.policy().params().flat_values();
    t.run_policy_phase();
    pass = pass && bitwise_equal(t.policy().params().flat_values(), before);
  }
  {
    // single-net: value gradient reaches no torso parameter in the policy
    // phase (checked at the gradient level), and does reach it in the aux
    // phase.
    Rng rng(43);
    PolicyNet<double> net(4, 3, {8}, true, rng);
    Matd obs = Matd::Random(6, 4);
    Vecd targ = Vecd::Random(6);
    Tape<double> tape;
    auto out = net.forward_tape(tape, obs, /*detach=*/true);
    tape.backward(tape.half_mse_mean(out.true_value, targ));
    auto& ps = net.params();
    for (int i = 0; i < ps.size(); ++i)
      if (net.is_torso_param(i))
        pass = pass && (ps.at(i).grad.array() == 0.0).all() &&
               !ps.grad_active(i);

    Tape<double> tape2;
    auto out2 = net.forward_tape(tape2, obs, /*detach=*/false);
    tape2.backward(tape2.half_mse_mean(out2.true_value, targ));
    double torso_grad = 0.0;
    for (int i = 0; i < ps.size(); ++i)
      if (net.is_torso_param(i))
        torso_grad = std::max(torso_grad, ps.at(i).grad.cwiseAbs().maxCoeff());
    pass = pass && torso_grad > 0.0;
  }
  {
    // trainer-level: with E_pi = 0 the single-net torso is bitwise frozen
    // through a policy phase, and moves in the aux phase.
    auto opts = small_options(Variant::PpgSingleNet, 44);
    opts.hp.e_pi = 0;
    Trainer<double> t(opts);
    const auto before = torso_values(t.policy());
    t.run_policy_phase();
    pass = pass && bitwise_equal(torso_values(t.policy()), before);
    t.buffer().freeze_policy(t.policy());
    t.run_auxiliary_phase();
    pass = pass && !bitwise_equal(torso_values(t.policy()), before);
  }
  detail = "E_V=0 / E_pi=0 bitwise, single-net torso gradient cut";
  return pass;
}

// ---------------------------------------------------------------------- 5
bool criterion_freeze(std::string& detail) {
  auto opts = small_options(Variant::PpgDual, 51);
  Trainer<double> t(opts);
  t.run_policy_phase();
  t.buffer().freeze_policy(t.policy());
  std::vector<int> idx;
  for (Eigen::Index i = 0; i < t.buffer().size(); ++i)
    idx.push_back(static_cast<int>(i));
  Matd obs, frozen;
  Vecd targ;
  t.buffer().gather(idx, obs, targ, frozen);
  const auto out = t.policy().forward(obs);
  const double kl0 =
      CategoricalDist<double>{frozen}.kl(CategoricalDist<double>{out.logits}).mean();
  const std::uint64_t sum_before = t.buffer().target_checksum();
  t.run_auxiliary_phase();
  const std::uint64_t sum_after = t.buffer().target_checksum();
  detail = "clone KL at aux start " + fmt(kl0) + ", target checksum " +
           (sum_before == sum_after ? "unchanged" : "CHANGED");
  return kl0 <= 1e-12 && sum_before == sum_after;
}

// ---------------------------------------------------------------------- 6
bool criterion_determinism(std::string& detail) {
  ExperimentConfig cfg;
  apply_overrides(cfg, {"env.name=chain", "env.length=6", "env.num_envs=2",
                        "rollout.horizon=16", "rollout.minibatches=2",
                        "phasic.n_pi=2", "phasic.e_aux=1",
                        "phasic.aux_minibatches_per_npi=2", "nn.hidden=8",
                        "run.total_steps=128", "run.seeds=11"});
  finalize_config(cfg);
  std::ostringstream log;
  const fs::path dir = g_out_root / "determinism";
  run_experiment(cfg, 1, log, (dir / "a").string());
  run_experiment(cfg, 1, log, (dir / "b").string());
  auto read = [](const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string ma = read(dir / "a/seed_11/metrics.csv");
  const std::string mb = read(dir / "b/seed_11/metrics.csv");
  detail = std::to_string(ma.size()) + " bytes compared";
  return !ma.empty() && ma == mb;
}

// ------------------------------------------------------------------- 7, 8
struct DirectionalResults {
  std::vector<double> ppg, ppo, npi2;
  bool ran = false;
};
DirectionalResults g_directional;

void run_directional() {
  if (g_directional.ran) return;
  g_directional.ran = true;
  const std::vector<std::string> base = {
      "env.name=keydoor", "env.num_envs=16", "run.total_steps=2000000",
      "run.seeds=0,1,2,3,4"};
  auto run_group = [&](const std::string& label,
                       const std::vector<std::string>& extra) {
    ExperimentConfig cfg;
    apply_overrides(cfg, base);
    apply_overrides(cfg, extra);
    finalize_config(cfg);
    std::cout << "  [7/8] training " << label << " (5 seeds, 2M steps)\n";
    std::ostringstream log;
    const auto summary =
        run_experiment(cfg, g_jobs, log, (g_out_root / "directional" / label).string());
    std::vector<double> finals;
    for (const auto& r : summary.runs) finals.push_back(r.final_return);
    std::cout << "  [7/8] " << label << " final returns:";
    for (double f : finals) std::cout << " " << fmt(f);
    std::cout << " (median " << fmt(median(finals)) << ")\n";
    return finals;
  };
  g_directional.ppg = run_group("ppg", {"phasic.variant=ppg-dual"});
  g_directional.ppo = run_group("ppo", {"phasic.variant=ppo-shared"});
  g_directional.npi2 = run_group("npi2", {"phasic.variant=ppg-dual", "phasic.n_pi=2"});
}

bool criterion_figure2(std::string& detail) {
  run_directional();
  const double m_ppg = median(g_directional.ppg);
  const double m_ppo = median(g_directional.ppo);
  detail = "median final return: ppg " + fmt(m_ppg) + " vs ppo-shared " + fmt(m_ppo);
  return m_ppg >= m_ppo;
}

bool criterion_aux_freq(std::string& detail) {
  run_directional();
  const double m32 = median(g_directional.ppg);
  const double m2 = median(g_directional.npi2);
  detail = "median final return: n_pi=2 " + fmt(m2) + " vs n_pi=32 " + fmt(m32);
  return m2 <= m32;
}

// ---------------------------------------------------------------------- 9
bool criterion_reward_norm(std::string& detail) {
  const int w = 16;
  const double gamma = 0.999;
  VecEnv env("keydoor", w, 909);
  env.reset();
  RewardNormalizer norm(w, gamma);
  Rng rng(910);
  Matd obs;
  Vecd rew;
  std::vector<std::uint8_t> done;
  Vecd running = Vecd::Zero(w);
  std::vector<double> samples;
  const int total_steps = 50000 / w;
  for (int t = 0; t < total_steps; ++t) {
    std::vector<int> acts(w);
    for (auto& a : acts) a = static_cast<int>(rng.below(4));
    env.step(acts, obs, rew, done);
    const Vecd scaled = norm.normalize_step(rew, done);
    running = gamma * running + scaled;
    if (t >= total_steps / 2)
      for (int i = 0; i < w; ++i) samples.push_back(running(i));
    for (int i = 0; i < w; ++i)
      if (done[static_cast<std::size_t>(i)]) running(i) = 0.0;
  }
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (double s : samples) var += (s - mean) * (s - mean);
  var /= static_cast<double>(samples.size());
  const double sd = std::sqrt(var);
  detail = "std of normalized discounted returns " + fmt(sd) + " after 50k steps";
  return sd >= 0.5 && sd <= 2.0;
}

// --------------------------------------------------------------------- 10
bool criterion_bandit(std::string& detail) {
  const std::vector<Variant> variants = {
      Variant::PpgDual,      Variant::PpgSingleNet, Variant::PpgKlPenalty,
      Variant::PpgNoAuxValue, Variant::PpoShared,    Variant::PpoSeparate};
  struct Job {
    Variant variant;
    std::uint64_t seed;
    double prob = 0.0;
  };
  std::vector<Job> jobs;
  for (Variant v : variants)
    for (std::uint64_t seed = 0; seed < 5; ++seed) jobs.push_back({v, seed});

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      ExperimentConfig cfg;
      apply_overrides(cfg, {"env.name=bandit", "env.num_envs=4",
                            "rollout.horizon=64", "run.total_steps=50000"});
      config_set(cfg, "phasic.variant", variant_name(jobs[i].variant));
      finalize_config(cfg);
      TrainerOptions opts = make_trainer_options(cfg, jobs[i].seed, "");
      Trainer<double> t(opts);
      t.run();
      Matd obs(1, 1);
      obs << 1.0;
      const auto out = t.policy().forward(obs);
      const Mat<double> p = softmax_rows(out.logits);
      jobs[i].prob = p(0, 0);
    }
  };
  std::vector<std::thread> pool;
  for (int k = 0; k < g_jobs; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  bool pass = true;
  double worst = 1.0;
  std::string worst_variant;
  for (const auto& j : jobs) {
    if (j.prob < worst) {
      worst = j.prob;
      worst_variant = variant_name(j.variant);
    }
    pass = pass && j.prob >= 0.95;
  }
  detail = "6 variants x 5 seeds; lowest P(better action) " + fmt(worst) +
           " (" + worst_variant + ")";
  return pass;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      std::string arg = argv[++i];
      std::istringstream ss(arg);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.push_back(std::stoi(tok));
    } else if (std::strcmp(argv[i], "--jobs") == 0 && i + 1 < argc) {
      g_jobs = std::stoi(argv[++i]);
    }
  }
  if (const char* env = std::getenv("PPG_ACCEPT_JOBS"); env && *env)
    g_jobs = std::atoi(env);
  if (g_jobs < 1) g_jobs = 1;

  g_out_root = fs::path("acceptance_runs");
  fs::create_directories(g_out_root);

  std::vector<Criterion> criteria = {
      {1, "gradient oracle (finite differences, 1e-5)", criterion_gradients},
      {2, "GAE brute-force oracle (1e-10)", criterion_gae_oracle},
      {3, "pinned loss values (1e-9)", criterion_loss_values},
      {4, "phase decoupling invariants (bitwise)", criterion_decoupling},
      {5, "freeze semantics (clone KL = 0, fixed targets)", criterion_freeze},
      {6, "determinism (byte-identical metrics.csv)", criterion_determinism},
      {7, "directional: PPG >= PPO on keydoor at 2M steps", criterion_figure2},
      {8, "directional: N_pi=2 <= N_pi=32 on keydoor", criterion_aux_freq},
      {9, "reward normalization unit-variance band", criterion_reward_norm},
      {10, "bandit sanity across all variants", criterion_bandit},
  };

  bool all_pass = true;
  for (auto& c : criteria) {
    if (!only.empty() &&
        std::find(only.begin(), only.end(), c.id) == only.end()) {
      std::printf("[%2d/10] %-55s SKIPPED\n", c.id, c.name.c_str());
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool pass = false;
    try {
      pass = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
      pass = false;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("[%2d/10] %-55s %s (%s; %.1fs)\n", c.id, c.name.c_str(),
                pass ? "PASS" : "FAIL", detail.c_str(), secs);
    std::fflush(stdout);
    all_pass = all_pass && pass;
  }
  return all_pass ? 0 : 1;
}
