#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ppg/losses.hpp"
#include "ppg/nets.hpp"
#include "ppg/tape.hpp"

namespace ppg {

struct GradCheckResult {
  std::string loss_name;
  double max_err = 0.0;  // max_i |analytic - fd| / max(1, ||fd||_inf)
  bool pass = false;
};

/// Central finite differences of f at the current parameters of `ps`.
template <class S>
std::vector<double> finite_difference_grad(ParameterSet<S>& ps,
                                           const std::function<double()>& f,
                                           double h) {
  std::vector<double> theta = ps.flat_values();
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    std::vector<double> t = theta;
    t[i] = theta[i] + h;
    ps.set_flat_values(t);
    const double fp = f();
    t[i] = theta[i] - h;
    ps.set_flat_values(t);
    const double fm = f();
    grad[i] = (fp - fm) / (2.0 * h);
  }
  ps.set_flat_values(theta);
  return grad;
}

inline double max_scaled_error(const std::vector<double>& analytic,
                               const std::vector<double>& fd) {
  double ref = 0.0;
  for (double g : fd) ref = std::max(ref, std::abs(g));
  ref = std::max(ref, 1.0);
  double err = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i)
    err = std::max(err, std::abs(analytic[i] - fd[i]) / ref);
  return err;
}

/// Checks every loss in the system (clip, value, aux, joint, KL-penalty,
/// entropy bonus) on tiny 64-bit networks: analytic tape gradients against
/// central finite differences. The loss values for the differencing are
/// computed through the plain (tape-free) forward path.
std::vector<GradCheckResult> run_gradient_checks(int instances_per_loss = 20,
                                                 double h = 1e-5,
                                                 double tol = 1e-5,
                                                 std::uint64_t seed = 1234);

namespace gradcheck_detail {

struct Instance {
  Matd obs;             // [B x D]
  std::vector<int> actions;
  Vecd logp_old;
  Vecd adv;
  Vecd targets;
  Matd old_logits;      // frozen / behavior logits
};

inline Instance random_instance(const PolicyNet<double>& policy, int batch,
                                Rng& rng) {
  Instance in;
  const int d = policy.obs_dim();
  const int a = policy.num_actions();
  in.obs.resize(batch, d);
  for (Eigen::Index i = 0; i < in.obs.size(); ++i)
    in.obs.data()[i] = rng.normal();
  const auto out = policy.forward(in.obs);
  CategoricalDist<double> dist{out.logits};
  in.actions = dist.sample(rng);
  // Behavior policy: the current one perturbed, so ratios spread around 1.
  in.old_logits = out.logits;
  for (Eigen::Index i = 0; i < in.old_logits.size(); ++i)
    in.old_logits.data()[i] += 0.3 * rng.normal();
  CategoricalDist<double> old_dist{in.old_logits};
  in.logp_old = old_dist.log_prob(in.actions);
  in.adv.resize(batch);
  in.targets.resize(batch);
  for (int i = 0; i < batch; ++i) {
    in.adv(i) = rng.normal();
    in.targets(i) = rng.normal();
  }
  (void)a;
  return in;
}

}  // namespace gradcheck_detail

inline std::vector<GradCheckResult> run_gradient_checks(int instances_per_loss,
                                                        double h, double tol,
                                                        std::uint64_t seed) {
  using gradcheck_detail::Instance;
  using gradcheck_detail::random_instance;
  Rng rng(seed);
  const int batch = 8, obs_dim = 3, actions = 3;
  const std::vector<int> hidden = {4};
  const double beta_clone = 0.7, beta_pi = 0.9, clip_eps = 0.2;

  struct LossDef {
    std::string name;
    // analytic grads for one instance + matching plain-forward evaluator
    std::function<double(PolicyNet<double>&, ValueNet<double>&, const Instance&,
                         std::vector<double>*)> run;
  };

  auto policy_eval = [&](PolicyNet<double>& p, const Instance& in,
                         const std::function<double(const PolicyNet<double>::Out&)>& f) {
    return f(p.forward(in.obs));
  };

  std::vector<LossDef> defs;
  defs.push_back({"L^clip", [&](PolicyNet<double>& p, ValueNet<double>&,
                                const Instance& in, std::vector<double>* fd) {
    if (fd) {
      *fd = finite_difference_grad<double>(p.params(), [&] {
        return policy_eval(p, in, [&](const auto& o) {
          CategoricalDist<double> d{o.logits};
          return loss_clip<double>(d.log_prob(in.actions), in.logp_old, in.adv,
                                   clip_eps);
        });
      }, h);
    }
    Tape<double> tape;
    auto out = p.forward_tape(tape, in.obs, false);
    int lp = tape.gather_log_prob(out.logits, in.actions);
    int loss = tape.clip_surrogate_mean(lp, in.logp_old, in.adv, clip_eps);
    tape.backward(loss);
    return tape.value(loss);
  }});

  defs.push_back({"L^value", [&](PolicyNet<double>&, ValueNet<double>& v,
                                 const Instance& in, std::vector<double>* fd) {
    if (fd) {
      *fd = finite_difference_grad<double>(v.params(), [&] {
        return loss_value<double>(v.forward(in.obs), in.targets);
      }, h);
    }
    Tape<double> tape;
    int pred = v.forward_tape(tape, in.obs);
    int loss = tape.half_mse_mean(pred, in.targets);
    tape.backward(loss);
    return tape.value(loss);
  }});

  defs.push_back({"L^aux", [&](PolicyNet<double>& p, ValueNet<double>&,
                               const Instance& in, std::vector<double>* fd) {
    if (fd) {
      *fd = finite_difference_grad<double>(p.params(), [&] {
        return policy_eval(p, in, [&](const auto& o) {
          return loss_aux<double>(o.aux_value, in.targets);
        });
      }, h);
    }
    Tape<double> tape;
    auto out = p.forward_tape(tape, in.obs, false);
    int loss = tape.half_mse_mean(out.aux_value, in.targets);
    tape.backward(loss);
    return tape.value(loss);
  }});

  defs.push_back({"L^joint", [&](PolicyNet<double>& p, ValueNet<double>&,
                                 const Instance& in, std::vector<double>* fd) {
    if (fd) {
      *fd = finite_difference_grad<double>(p.params(), [&] {
        return policy_eval(p, in, [&](const auto& o) {
          return loss_joint<double>(o.aux_value, in.targets, in.old_logits,
                                    o.logits, beta_clone);
        });
      }, h);
    }
    Tape<double> tape;
    auto out = p.forward_tape(tape, in.obs, false);
    int mse = tape.half_mse_mean(out.aux_value, in.targets);
    int kl = tape.kl_mean(in.old_logits, out.logits);
    int loss = tape.weighted_sum({{1.0, mse}, {beta_clone, kl}});
    tape.backward(loss);
    return tape.value(loss);
  }});

  defs.push_back({"L^KL", [&](PolicyNet<double>& p, ValueNet<double>&,
                              const Instance& in, std::vector<double>* fd) {
    if (fd) {
      *fd = finite_difference_grad<double>(p.params(), [&] {
        return policy_eval(p, in, [&](const auto& o) {
          CategoricalDist<double> d{o.logits};
          return loss_kl_policy<double>(d.log_prob(in.actions), in.logp_old,
                                        in.adv, in.old_logits, o.logits, beta_pi);
        });
      }, h);
    }
    Tape<double> tape;
    auto out = p.forward_tape(tape, in.obs, false);
    int lp = tape.gather_log_prob(out.logits, in.actions);
    int surr = tape.ratio_adv_mean(lp, in.logp_old, in.adv);
    int kl = tape.kl_mean(in.old_logits, out.logits);
    int loss = tape.weighted_sum({{-1.0, surr}, {beta_pi, kl}});
    tape.backward(loss);
    return tape.value(loss);
  }});

  defs.push_back({"entropy", [&](PolicyNet<double>& p, ValueNet<double>&,
                                 const Instance& in, std::vector<double>* fd) {
    if (fd) {
      *fd = finite_difference_grad<double>(p.params(), [&] {
        return policy_eval(p, in, [&](const auto& o) {
          return entropy_bonus<double>(o.logits);
        });
      }, h);
    }
    Tape<double> tape;
    auto out = p.forward_tape(tape, in.obs, false);
    int loss = tape.entropy_mean(out.logits);
    tape.backward(loss);
    return tape.value(loss);
  }});

  std::vector<GradCheckResult> results;
  for (auto& def : defs) {
    GradCheckResult res;
    res.loss_name = def.name;
    for (int inst = 0; inst < instances_per_loss; ++inst) {
      Rng net_rng(rng.bits());
      PolicyNet<double> policy(obs_dim, actions, hidden, false, net_rng);
      ValueNet<double> value(obs_dim, hidden, net_rng);
      // Move heads/torso off the orthogonal-init manifold a little.
      for (auto& prm : policy.params())
        for (Eigen::Index i = 0; i < prm.value.size(); ++i)
          prm.value.data()[i] += 0.1 * rng.normal();
      for (auto& prm : value.params())
        for (Eigen::Index i = 0; i < prm.value.size(); ++i)
          prm.value.data()[i] += 0.1 * rng.normal();
      const Instance in = random_instance(policy, batch, rng);
      std::vector<double> fd;
      def.run(policy, value, in, &fd);
      const std::vector<double> analytic =
          def.name == "L^value" ? value.params().flat_grads()
                                : policy.params().flat_grads();
      res.max_err = std::max(res.max_err, max_scaled_error(analytic, fd));
    }
    res.pass = res.max_err < tol;
    results.push_back(res);
  }
  return results;
}

}  // namespace ppg
