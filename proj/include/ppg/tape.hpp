#pragma once

#include <functional>
#include <set>
#include <utility>
#include <vector>

#include "ppg/common.hpp"
#include "ppg/distributions.hpp"
#include "ppg/losses.hpp"
#include "ppg/param.hpp"

namespace ppg {

struct ClipStats {
  double clip_fraction = 0.0;
};

/// Reverse-mode tape for the fixed set of graphs this trainer needs: MLP
/// forward passes ending in the PPO/PPG scalar losses. One tape per
/// minibatch: build the forward pass, call backward() once, discard.
///
/// backward() resets the gradient slots of every ParameterSet touched by the
/// tape, then fills exactly the parameters reachable from the loss. A
/// stop_gradient node cuts reachability, so e.g. a value loss on a detached
/// torso marks only the head parameters active.
template <class S>
class Tape {
 public:
  using M = Mat<S>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  int constant(M v) { return push(std::move(v), false, {}); }

  int param(ParameterSet<S>& set, int index) {
    int id = push(set.at(index).value, true, {});
    nodes_[static_cast<std::size_t>(id)].owner = &set;
    nodes_[static_cast<std::size_t>(id)].param_index = index;
    return id;
  }

  /// y = x * w + b, with b broadcast over rows. w: [in x out], b: [1 x out].
  int linear(int x, int w, int b) {
    const M& xv = val(x);
    const M& wv = val(w);
    const M& bv = val(b);
    require_shape(xv.cols() == wv.rows(), "linear: input dim vs weight rows");
    require_shape(bv.rows() == 1 && bv.cols() == wv.cols(), "linear: bias shape");
    M y = xv * wv;
    y.rowwise() += bv.row(0);
    int id = push(std::move(y), rg(x) || rg(w) || rg(b), {x, w, b});
    set_backward(id, [this, x, w, b](const M& g) {
      if (rg(x)) grad(x).noalias() += g * val(w).transpose();
      if (rg(w)) grad(w).noalias() += val(x).transpose() * g;
      if (rg(b)) grad(b).noalias() += g.colwise().sum();
    });
    return id;
  }

  int tanh_op(int x) {
    M y = val(x).array().tanh().matrix();
    int id = push(std::move(y), rg(x), {x});
    set_backward(id, [this, id, x](const M& g) {
      if (rg(x))
        grad(x).array() += g.array() * (S(1) - val(id).array().square());
    });
    return id;
  }

  /// Identity on values; gradients do not flow through (stop-gradient).
  int stop_gradient(int x) { return push(val(x), false, {}); }

  /// log pi(a_i | s_i) per row, shape [B x 1].
  int gather_log_prob(int logits, std::vector<int> actions) {
    CategoricalDist<S> dist{val(logits)};
    M out = dist.log_prob(actions);
    M probs = softmax_rows(val(logits));
    int id = push(std::move(out), rg(logits), {logits});
    set_backward(id, [this, logits, probs = std::move(probs),
                      actions = std::move(actions)](const M& g) {
      if (!rg(logits)) return;
      M& gz = grad(logits);
      gz -= (probs.array().colwise() * g.col(0).array()).matrix();
      for (Eigen::Index i = 0; i < g.rows(); ++i)
        gz(i, actions[static_cast<std::size_t>(i)]) += g(i, 0);
    });
    return id;
  }

  /// Mean policy entropy over the minibatch (scalar).
  int entropy_mean(int logits) {
    M ls = log_softmax_rows(val(logits));
    M probs = ls.array().exp().matrix();
    Vec<S> h = -(probs.array() * ls.array()).matrix().rowwise().sum();
    M out(1, 1);
    out(0, 0) = h.mean();
    const S inv_b = S(1) / static_cast<S>(ls.rows());
    int id = push(std::move(out), rg(logits), {logits});
    set_backward(id, [this, logits, ls = std::move(ls), probs = std::move(probs),
                      h = std::move(h), inv_b](const M& g) {
      if (!rg(logits)) return;
      const S u = g(0, 0) * inv_b;
      grad(logits) -=
          u * (probs.array() * (ls.array().colwise() + h.array())).matrix();
    });
    return id;
  }

  /// Mean KL(frozen || current) over the minibatch (scalar). The frozen
  /// distribution is a constant.
  int kl_mean(const M& frozen_logits, int logits) {
    CategoricalDist<S> frozen{frozen_logits};
    CategoricalDist<S> current{val(logits)};
    M out(1, 1);
    out(0, 0) = frozen.kl(current).mean();
    M p_old = softmax_rows(frozen_logits);
    M p_new = softmax_rows(val(logits));
    const S inv_b = S(1) / static_cast<S>(p_old.rows());
    int id = push(std::move(out), rg(logits), {logits});
    set_backward(id, [this, logits, p_old = std::move(p_old),
                      p_new = std::move(p_new), inv_b](const M& g) {
      if (!rg(logits)) return;
      grad(logits) += (g(0, 0) * inv_b) * (p_new - p_old);
    });
    return id;
  }

  /// Clipped surrogate objective (value to MAXIMIZE), scalar. The gradient
  /// w.r.t. logp is exactly zero for samples where the clipped branch is
  /// strictly active.
  int clip_surrogate_mean(int logp, const Vec<S>& logp_old, const Vec<S>& adv,
                          S eps, ClipStats* stats = nullptr) {
    const Vec<S> lp_new = val(logp).col(0);
    M out(1, 1);
    out(0, 0) = loss_clip<S>(lp_new, logp_old, adv, eps);
    Vec<S> coeff(lp_new.size());
    Eigen::Index clipped = 0;
    for (Eigen::Index i = 0; i < lp_new.size(); ++i) {
      const S r = std::exp(lp_new(i) - logp_old(i));
      if (std::abs(r - S(1)) > eps) ++clipped;
      const bool inactive = (r > S(1) + eps && adv(i) > S(0)) ||
                            (r < S(1) - eps && adv(i) < S(0));
      coeff(i) = inactive ? S(0) : r * adv(i);
    }
    if (stats)
      stats->clip_fraction =
          static_cast<double>(clipped) / static_cast<double>(lp_new.size());
    const S inv_b = S(1) / static_cast<S>(lp_new.size());
    int id = push(std::move(out), rg(logp), {logp});
    set_backward(id, [this, logp, coeff = std::move(coeff), inv_b](const M& g) {
      if (!rg(logp)) return;
      grad(logp).col(0) += (g(0, 0) * inv_b) * coeff;
    });
    return id;
  }

  /// mean(adv * ratio), the importance-weighted surrogate used by the
  /// KL-penalty objective (scalar, value to MAXIMIZE).
  int ratio_adv_mean(int logp, const Vec<S>& logp_old, const Vec<S>& adv) {
    const Vec<S> lp_new = val(logp).col(0);
    Vec<S> r = (lp_new - logp_old).array().exp().matrix();
    M out(1, 1);
    out(0, 0) = r.cwiseProduct(adv).mean();
    Vec<S> coeff = r.cwiseProduct(adv);
    const S inv_b = S(1) / static_cast<S>(lp_new.size());
    int id = push(std::move(out), rg(logp), {logp});
    set_backward(id, [this, logp, coeff = std::move(coeff), inv_b](const M& g) {
      if (!rg(logp)) return;
      grad(logp).col(0) += (g(0, 0) * inv_b) * coeff;
    });
    return id;
  }

  /// mean(0.5 * (pred - target)^2), scalar. pred: [B x 1].
  int half_mse_mean(int pred, const Vec<S>& target) {
    const Vec<S> v = val(pred).col(0);
    require_shape(v.size() == target.size(), "half_mse_mean inputs");
    M out(1, 1);
    out(0, 0) = loss_value<S>(v, target);
    Vec<S> diff = v - target;
    const S inv_b = S(1) / static_cast<S>(v.size());
    int id = push(std::move(out), rg(pred), {pred});
    set_backward(id, [this, pred, diff = std::move(diff), inv_b](const M& g) {
      if (!rg(pred)) return;
      grad(pred).col(0) += (g(0, 0) * inv_b) * diff;
    });
    return id;
  }

  int sum_elements(int x) {
    M out(1, 1);
    out(0, 0) = val(x).sum();
    int id = push(std::move(out), rg(x), {x});
    set_backward(id, [this, x](const M& g) {
      if (rg(x)) grad(x).array() += g(0, 0);
    });
    return id;
  }

  /// c_1 * s_1 + c_2 * s_2 + ... over scalar nodes.
  int weighted_sum(std::vector<std::pair<S, int>> terms) {
    S acc = S(0);
    bool needs = false;
    std::vector<int> parents;
    for (const auto& [c, n] : terms) {
      acc += c * val(n)(0, 0);
      needs = needs || rg(n);
      parents.push_back(n);
    }
    M out(1, 1);
    out(0, 0) = acc;
    int id = push(std::move(out), needs, std::move(parents));
    set_backward(id, [this, terms = std::move(terms)](const M& g) {
      for (const auto& [c, n] : terms)
        if (rg(n)) grad(n)(0, 0) += g(0, 0) * c;
    });
    return id;
  }

  const M& val(int id) const { return nodes_[static_cast<std::size_t>(id)].val; }
  double value(int id) const { return static_cast<double>(val(id)(0, 0)); }
  bool rg(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

  /// Reverse sweep from a scalar node. Fills the gradient slots of every
  /// ParameterSet touched by this tape (resetting them first), marks the
  /// parameters actually reached, and aborts on non-finite gradients naming
  /// the parameter.
  void backward(int root) {
    if (backward_done_)
      throw ContractError("Tape::backward called twice on one tape");
    backward_done_ = true;
    Node& r = nodes_[static_cast<std::size_t>(root)];
    require_shape(r.val.rows() == 1 && r.val.cols() == 1,
                  "backward root must be scalar");

    std::set<ParameterSet<S>*> owners;
    for (const Node& n : nodes_)
      if (n.owner) owners.insert(n.owner);
    for (ParameterSet<S>* ps : owners) ps->zero_grad();

    std::vector<char> reached(nodes_.size(), 0);
    reached[static_cast<std::size_t>(root)] = 1;
    for (int i = root; i >= 0; --i) {
      if (!reached[static_cast<std::size_t>(i)]) continue;
      for (int p : nodes_[static_cast<std::size_t>(i)].parents)
        if (rg(p)) reached[static_cast<std::size_t>(p)] = 1;
    }

    if (r.needs_grad) {
      r.grad(0, 0) = S(1);
      for (int i = root; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (reached[static_cast<std::size_t>(i)] && n.needs_grad && n.backward_fn)
          n.backward_fn(n.grad);
      }
    }

    bool any_active = false;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Node& n = nodes_[i];
      if (!n.owner || !reached[i]) continue;
      auto& p = n.owner->at(n.param_index);
      p.grad += n.grad;
      n.owner->set_grad_active(n.param_index);
      any_active = true;
      if (!p.grad.allFinite())
        throw NumericError("non-finite gradient in parameter '" + p.name + "'");
    }
    for (ParameterSet<S>* ps : owners) ps->set_has_grads(true);
    (void)any_active;
  }

 private:
  struct Node {
    M val;
    M grad;
    bool needs_grad = false;
    std::vector<int> parents;
    std::function<void(const M&)> backward_fn;
    ParameterSet<S>* owner = nullptr;
    int param_index = -1;
  };

  std::vector<Node> nodes_;
  bool backward_done_ = false;

  int push(M v, bool needs_grad, std::vector<int> parents) {
    Node n;
    n.val = std::move(v);
    n.needs_grad = needs_grad;
    n.parents = std::move(parents);
    if (needs_grad) n.grad = M::Zero(n.val.rows(), n.val.cols());
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  M& grad(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }

  template <class F>
  void set_backward(int id, F&& f) {
    nodes_[static_cast<std::size_t>(id)].backward_fn = std::forward<F>(f);
  }
};

}  // namespace ppg
