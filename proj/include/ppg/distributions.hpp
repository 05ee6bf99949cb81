#pragma once

#include <stdexcept>
#include <vector>

#include "ppg/common.hpp"
#include "ppg/rng.hpp"

namespace ppg {

/// Row-wise log-softmax, stabilized by the row max.
template <class S>
Mat<S> log_softmax_rows(const Mat<S>& logits) {
  Mat<S> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const S mx = logits.row(r).maxCoeff();
    S sum = S(0);
    for (Eigen::Index c = 0; c < logits.cols(); ++c)
      sum += std::exp(logits(r, c) - mx);
    const S lse = mx + std::log(sum);
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

template <class S>
Mat<S> softmax_rows(const Mat<S>& logits) {
  Mat<S> ls = log_softmax_rows(logits);
  return ls.array().exp().matrix();
}

/// Batch of categorical distributions, one per row of logits.
template <class S>
struct CategoricalDist {
  Mat<S> logits;

  Eigen::Index batch() const { return logits.rows(); }
  Eigen::Index action_count() const { return logits.cols(); }

  /// log pi(a|s) per row.
  Vec<S> log_prob(const std::vector<int>& actions) const {
    if (static_cast<Eigen::Index>(actions.size()) != logits.rows())
      require_shape(false, "log_prob: actions length vs logits rows");
    Mat<S> ls = log_softmax_rows(logits);
    Vec<S> out(logits.rows());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const int a = actions[static_cast<std::size_t>(r)];
      if (a < 0 || a >= logits.cols())
        throw std::out_of_range("log_prob: action " + std::to_string(a) +
                                " out of range [0, " +
                                std::to_string(logits.cols()) + ") at row " +
                                std::to_string(r));
      out(r) = ls(r, a);
    }
    return out;
  }

  /// Per-row entropy, in [0, log(action_count)].
  Vec<S> entropy() const {
    Mat<S> ls = log_softmax_rows(logits);
    Vec<S> out(logits.rows());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      S h = S(0);
      for (Eigen::Index c = 0; c < logits.cols(); ++c)
        h -= std::exp(ls(r, c)) * ls(r, c);
      out(r) = h;
    }
    return out;
  }

  /// KL(this || other) per row; argument order matches the trainer's
  /// KL(old || new) convention.
  Vec<S> kl(const CategoricalDist<S>& other) const {
    if (logits.cols() != other.logits.cols() || logits.rows() != other.logits.rows())
      require_shape(false, "kl: mismatched logits");
    Mat<S> lp = log_softmax_rows(logits);
    Mat<S> lq = log_softmax_rows(other.logits);
    Vec<S> out(logits.rows());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      S acc = S(0);
      for (Eigen::Index c = 0; c < logits.cols(); ++c)
        acc += std::exp(lp(r, c)) * (lp(r, c) - lq(r, c));
      out(r) = acc;
    }
    return out;
  }

  /// One action per row via inverse-CDF; consumes one uniform per row.
  std::vector<int> sample(Rng& rng) const {
    Mat<S> p = softmax_rows(logits);
    std::vector<int> actions(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const double u = rng.uniform();
      double acc = 0.0;
      int pick = static_cast<int>(logits.cols()) - 1;
      for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        acc += static_cast<double>(p(r, c));
        if (u < acc) {
          pick = static_cast<int>(c);
          break;
        }
      }
      actions[static_cast<std::size_t>(r)] = pick;
    }
    return actions;
  }
};

}  // namespace ppg
