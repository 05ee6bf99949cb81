#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ppg/common.hpp"
#include "ppg/param.hpp"
#include "ppg/rng.hpp"
#include "ppg/tape.hpp"

namespace ppg {

/// Orthogonal init: QR of a Gaussian matrix with the sign of R's diagonal
/// folded in, scaled by `gain`. Computed in double regardless of S.
inline Matd orthogonal_matrix(Eigen::Index rows, Eigen::Index cols, double gain,
                              Rng& rng) {
  const bool transpose = rows < cols;
  const Eigen::Index r = transpose ? cols : rows;
  const Eigen::Index c = transpose ? rows : cols;
  Matd g(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r, c);
  Eigen::MatrixXd rm = qr.matrixQR().topRows(c).template triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < c; ++j)
    if (rm(j, j) < 0) q.col(j) = -q.col(j);
  Matd out = transpose ? Matd(q.transpose()) : Matd(q);
  return gain * out;
}

namespace detail {

template <class S>
int add_linear(ParameterSet<S>& ps, const std::string& prefix, Eigen::Index in,
               Eigen::Index out, double gain, Rng& rng) {
  int w = ps.add(prefix + ".w", in, out);
  ps.add(prefix + ".b", 1, out);
  ps.at(w).value = orthogonal_matrix(in, out, gain, rng).template cast<S>();
  return w;  // bias is always w + 1
}

}  // namespace detail

/// Shared MLP body: tanh-activated hidden layers. Heads attach to its
/// output features.
template <class S>
struct Torso {
  std::vector<int> layer_w;  // parameter indices (bias = w+1)
  int input_dim = 0;
  int output_dim = 0;

  void build(ParameterSet<S>& ps, int in_dim, const std::vector<int>& hidden,
             Rng& rng) {
    input_dim = in_dim;
    int d = in_dim;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      layer_w.push_back(detail::add_linear(ps, "torso.l" + std::to_string(i), d,
                                           hidden[i], std::sqrt(2.0), rng));
      d = hidden[i];
    }
    output_dim = d;
  }

  Mat<S> forward(const ParameterSet<S>& ps, const Mat<S>& x) const {
    require_shape(x.cols() == input_dim,
                  "torso input dim " + std::to_string(x.cols()) + " vs expected " +
                      std::to_string(input_dim));
    Mat<S> h = x;
    for (int w : layer_w) {
      Mat<S> y = h * ps.at(w).value;
      y.rowwise() += ps.at(w + 1).value.row(0);
      h = y.array().tanh().matrix();
    }
    return h;
  }

  int forward_tape(Tape<S>& tape, ParameterSet<S>& ps, int x) const {
    require_shape(tape.val(x).cols() == input_dim,
                  "torso input dim " + std::to_string(tape.val(x).cols()) +
                      " vs expected " + std::to_string(input_dim));
    int h = x;
    for (int w : layer_w) {
      int wp = tape.param(ps, w);
      int bp = tape.param(ps, w + 1);
      h = tape.tanh_op(tape.linear(h, wp, bp));
    }
    return h;
  }

  bool owns_param(int index) const {
    for (int w : layer_w)
      if (index == w || index == w + 1) return true;
    return false;
  }
};

/// Policy network: torso + action-logit head + auxiliary value head, and in
/// the single-network configuration an additional true value head whose
/// torso gradient is cut during the policy phase.
template <class S>
class PolicyNet {
 public:
  PolicyNet(int obs_dim, int num_actions, const std::vector<int>& hidden,
            bool with_true_value_head, Rng& rng)
      : obs_dim_(obs_dim), num_actions_(num_actions) {
    torso_.build(params_, obs_dim, hidden, rng);
    pi_w_ = detail::add_linear(params_, "pi_head", torso_.output_dim,
                               num_actions, 0.01, rng);
    aux_w_ = detail::add_linear(params_, "aux_head", torso_.output_dim, 1, 1.0,
                                rng);
    if (with_true_value_head)
      vtrue_w_ = detail::add_linear(params_, "value_head", torso_.output_dim, 1,
                                    1.0, rng);
  }

  struct Out {
    Mat<S> logits;
    Vec<S> aux_value;
    std::optional<Vec<S>> true_value;
  };

  Out forward(const Mat<S>& obs) const {
    Mat<S> h = torso_.forward(params_, obs);
    Out out;
    out.logits = head(h, pi_w_);
    out.aux_value = head(h, aux_w_).col(0);
    if (vtrue_w_ >= 0) out.true_value = Vec<S>(head(h, vtrue_w_).col(0));
    return out;
  }

  struct TapeOut {
    int logits = -1;
    int aux_value = -1;  // [B x 1]
    int true_value = -1;
  };

  /// detach_torso_for_value cuts the true-value gradient at the last shared
  /// layer: the value loss then updates only the value head's own linears.
  TapeOut forward_tape(Tape<S>& tape, const Mat<S>& obs,
                       bool detach_torso_for_value) {
    int x = tape.constant(obs);
    int h = torso_.forward_tape(tape, params_, x);
    TapeOut out;
    out.logits = tape.linear(h, tape.param(params_, pi_w_),
                             tape.param(params_, pi_w_ + 1));
    out.aux_value = tape.linear(h, tape.param(params_, aux_w_),
                                tape.param(params_, aux_w_ + 1));
    if (vtrue_w_ >= 0) {
      int hv = detach_torso_for_value ? tape.stop_gradient(h) : h;
      out.true_value = tape.linear(hv, tape.param(params_, vtrue_w_),
                                   tape.param(params_, vtrue_w_ + 1));
    }
    return out;
  }

  ParameterSet<S>& params() { return params_; }
  const ParameterSet<S>& params() const { return params_; }
  int obs_dim() const { return obs_dim_; }
  int num_actions() const { return num_actions_; }
  bool has_true_value_head() const { return vtrue_w_ >= 0; }
  bool is_torso_param(int index) const { return torso_.owns_param(index); }

 private:
  Mat<S> head(const Mat<S>& h, int w) const {
    Mat<S> y = h * params_.at(w).value;
    y.rowwise() += params_.at(w + 1).value.row(0);
    return y;
  }

  int obs_dim_;
  int num_actions_;
  ParameterSet<S> params_;
  Torso<S> torso_;
  int pi_w_ = -1;
  int aux_w_ = -1;
  int vtrue_w_ = -1;
};

/// Disjoint value network: same torso family, scalar head. Shares no
/// parameters with the policy network.
template <class S>
class ValueNet {
 public:
  ValueNet(int obs_dim, const std::vector<int>& hidden, Rng& rng)
      : obs_dim_(obs_dim) {
    torso_.build(params_, obs_dim, hidden, rng);
    v_w_ = detail::add_linear(params_, "v_head", torso_.output_dim, 1, 1.0, rng);
  }

  Vec<S> forward(const Mat<S>& obs) const {
    Mat<S> h = torso_.forward(params_, obs);
    Mat<S> y = h * params_.at(v_w_).value;
    y.rowwise() += params_.at(v_w_ + 1).value.row(0);
    return y.col(0);
  }

  /// Returns the [B x 1] value node.
  int forward_tape(Tape<S>& tape, const Mat<S>& obs) {
    int x = tape.constant(obs);
    int h = torso_.forward_tape(tape, params_, x);
    return tape.linear(h, tape.param(params_, v_w_),
                       tape.param(params_, v_w_ + 1));
  }

  ParameterSet<S>& params() { return params_; }
  const ParameterSet<S>& params() const { return params_; }
  int obs_dim() const { return obs_dim_; }
  bool is_torso_param(int index) const { return torso_.owns_param(index); }

 private:
  int obs_dim_;
  ParameterSet<S> params_;
  Torso<S> torso_;
  int v_w_ = -1;
};

}  // namespace ppg
