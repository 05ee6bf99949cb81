// Independent oracles used by the unit and acceptance suites: direct
// summation for the categorical quantities, an O(T^2) double loop for GAE.
// These deliberately do not share code with the library implementations
// they check.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ppg/common.hpp"

namespace oracle {

inline std::vector<double> softmax_row(const std::vector<double>& logits) {
  double mx = logits[0];
  for (double z : logits) mx = std::max(mx, z);
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

inline double log_prob_row(const std::vector<double>& logits, int action) {
  return std::log(softmax_row(logits)[static_cast<std::size_t>(action)]);
}

inline double entropy_row(const std::vector<double>& logits) {
  const auto p = softmax_row(logits);
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

inline double kl_row(const std::vector<double>& p_logits,
                     const std::vector<double>& q_logits) {
  const auto p = softmax_row(p_logits);
  const auto q = softmax_row(q_logits);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) acc += p[i] * (std::log(p[i]) - std::log(q[i]));
  return acc;
}

inline std::vector<double> row_of(const ppg::Matd& m, Eigen::Index r) {
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    out[static_cast<std::size_t>(c)] = m(r, c);
  return out;
}

/// Brute-force GAE: A_t = sum_{l>=0} (gamma*lambda)^l delta_{t+l}, where the
/// sum stops at the first done inside the window and delta_k masks its own
/// bootstrap.
inline ppg::Matd gae_bruteforce(const ppg::Matd& rewards, const ppg::Matd& values,
                                const std::vector<std::uint8_t>& dones,
                                double gamma, double lambda) {
  const Eigen::Index w = rewards.rows();
  const Eigen::Index t = rewards.cols();
  ppg::Matd adv(w, t);
  for (Eigen::Index i = 0; i < w; ++i) {
    for (Eigen::Index k = 0; k < t; ++k) {
      double acc = 0.0;
      double coeff = 1.0;
      for (Eigen::Index l = k; l < t; ++l) {
        const bool done = dones[static_cast<std::size_t>(i * t + l)] != 0;
        const double not_done = done ? 0.0 : 1.0;
        const double delta =
            rewards(i, l) + gamma * not_done * values(i, l + 1) - values(i, l);
        acc += coeff * delta;
        if (done) break;
        coeff *= gamma * lambda;
      }
      adv(i, k) = acc;
    }
  }
  return adv;
}

/// Discounted return with bootstrap, stopping at episode ends; the lambda=1
/// reference.
inline ppg::Matd discounted_returns(const ppg::Matd& rewards, const ppg::Matd& values,
                                    const std::vector<std::uint8_t>& dones,
                                    double gamma) {
  const Eigen::Index w = rewards.rows();
  const Eigen::Index t = rewards.cols();
  ppg::Matd ret(w, t);
  for (Eigen::Index i = 0; i < w; ++i) {
    for (Eigen::Index k = 0; k < t; ++k) {
      double acc = 0.0;
      double coeff = 1.0;
      for (Eigen::Index l = k; l < t; ++l) {
        acc += coeff * rewards(i, l);
        coeff *= gamma;
        if (dones[static_cast<std::size_t>(i * t + l)]) {
          coeff = 0.0;
          break;
        }
      }
      acc += coeff * values(i, t);  // bootstrap only if no done was hit
      ret(i, k) = acc;
    }
  }
  return ret;
}

}  // namespace oracle
