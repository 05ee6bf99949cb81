#pragma once

#include "ppg/common.hpp"
#include "ppg/distributions.hpp"

namespace ppg {

/// Clipped surrogate objective, mean over the minibatch. This is the value
/// to MAXIMIZE; the trainer negates it. Non-finite ratios abort.
template <class S>
S loss_clip(const Vec<S>& logp_new, const Vec<S>& logp_old, const Vec<S>& adv,
            S eps) {
  require_shape(logp_new.size() == logp_old.size() && logp_new.size() == adv.size(),
                "loss_clip inputs");
  S acc = S(0);
  for (Eigen::Index i = 0; i < logp_new.size(); ++i) {
    const S r = std::exp(logp_new(i) - logp_old(i));
    if (!std::isfinite(static_cast<double>(r)))
      throw NumericError("loss_clip: non-finite probability ratio at sample " +
                         std::to_string(i));
    const S rc = std::min(std::max(r, S(1) - eps), S(1) + eps);
    acc += std::min(r * adv(i), rc * adv(i));
  }
  return acc / static_cast<S>(logp_new.size());
}

/// Value regression loss, mean of 0.5 * (pred - target)^2.
template <class S>
S loss_value(const Vec<S>& v_pred, const Vec<S>& v_targ) {
  require_shape(v_pred.size() == v_targ.size(), "loss_value inputs");
  return S(0.5) * (v_pred - v_targ).squaredNorm() / static_cast<S>(v_pred.size());
}

/// Auxiliary value loss: same contract as loss_value, applied to the policy
/// network's auxiliary head.
template <class S>
S loss_aux(const Vec<S>& aux_value, const Vec<S>& v_targ) {
  return loss_value<S>(aux_value, v_targ);
}

/// Joint auxiliary-phase objective: aux value loss plus beta_clone times the
/// mean KL(frozen || current).
template <class S>
S loss_joint(const Vec<S>& aux_value, const Vec<S>& v_targ,
             const Mat<S>& logits_frozen, const Mat<S>& logits_current,
             S beta_clone) {
  CategoricalDist<S> frozen{logits_frozen};
  CategoricalDist<S> current{logits_current};
  const S kl_mean = frozen.kl(current).mean();
  return loss_aux<S>(aux_value, v_targ) + beta_clone * kl_mean;
}

/// Fixed-KL-penalty policy loss (to MINIMIZE):
/// mean[-adv * ratio + beta_pi * KL(old || new)].
template <class S>
S loss_kl_policy(const Vec<S>& logp_new, const Vec<S>& logp_old,
                 const Vec<S>& adv, const Mat<S>& logits_old,
                 const Mat<S>& logits_new, S beta_pi) {
  require_shape(logp_new.size() == logp_old.size() && logp_new.size() == adv.size(),
                "loss_kl_policy inputs");
  CategoricalDist<S> old_d{logits_old};
  CategoricalDist<S> new_d{logits_new};
  Vec<S> kl = old_d.kl(new_d);
  S acc = S(0);
  for (Eigen::Index i = 0; i < logp_new.size(); ++i) {
    const S r = std::exp(logp_new(i) - logp_old(i));
    acc += -adv(i) * r + beta_pi * kl(i);
  }
  return acc / static_cast<S>(logp_new.size());
}

/// Mean policy entropy over the minibatch (the S[pi] bonus term).
template <class S>
S entropy_bonus(const Mat<S>& logits) {
  CategoricalDist<S> d{logits};
  return d.entropy().mean();
}

}  // namespace ppg
