#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ppg/common.hpp"

namespace ppg {

/// One named tensor plus a gradient slot of identical shape.
template <class S>
struct Parameter {
  std::string name;
  Mat<S> value;
  Mat<S> grad;
};

/// Flat list of named parameter tensors. Single writer; gradient slots are
/// filled by Tape::backward and consumed by Adam::step. A parameter is
/// "active" when the last backward pass actually reached it; the optimizer
/// skips inactive parameters entirely, so a loss that never touches a head
/// leaves that head's moments and step count alone.
template <class S>
class ParameterSet {
 public:
  int add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    Parameter<S> p;
    p.name = name;
    p.value = Mat<S>::Zero(rows, cols);
    p.grad = Mat<S>::Zero(rows, cols);
    params_.push_back(std::move(p));
    active_.push_back(0);
    return static_cast<int>(params_.size()) - 1;
  }

  Parameter<S>& at(int i) { return params_[static_cast<std::size_t>(i)]; }
  const Parameter<S>& at(int i) const { return params_[static_cast<std::size_t>(i)]; }

  int find(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (params_[i].name == name) return static_cast<int>(i);
    return -1;
  }

  int size() const { return static_cast<int>(params_.size()); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
    for (auto& a : active_) a = 0;
    has_grads_ = false;
  }

  bool has_grads() const { return has_grads_; }
  void set_has_grads(bool v) { has_grads_ = v; }
  bool grad_active(int i) const { return active_[static_cast<std::size_t>(i)] != 0; }
  void set_grad_active(int i) { active_[static_cast<std::size_t>(i)] = 1; }

  /// Flattened copies, used by finite-difference oracles and checkpointing.
  std::vector<double> flat_values() const {
    std::vector<double> out;
    out.reserve(scalar_count());
    for (const auto& p : params_)
      for (Eigen::Index i = 0; i < p.value.size(); ++i)
        out.push_back(static_cast<double>(p.value.data()[i]));
    return out;
  }

  void set_flat_values(const std::vector<double>& v) {
    std::size_t k = 0;
    for (auto& p : params_)
      for (Eigen::Index i = 0; i < p.value.size(); ++i)
        p.value.data()[i] = static_cast<S>(v.at(k++));
  }

  std::vector<double> flat_grads() const {
    std::vector<double> out;
    out.reserve(scalar_count());
    for (const auto& p : params_)
      for (Eigen::Index i = 0; i < p.grad.size(); ++i)
        out.push_back(static_cast<double>(p.grad.data()[i]));
    return out;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Parameter<S>> params_;
  std::vector<char> active_;
  bool has_grads_ = false;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over one ParameterSet. Moments are shaped like the
/// parameters; step counts are per parameter so that a parameter only
/// advances when a loss actually produced a gradient for it.
template <class S>
class Adam {
 public:
  Adam() = default;
  Adam(const ParameterSet<S>& params, AdamConfig cfg) : cfg_(cfg) {
    for (const auto& p : params) {
      m_.push_back(Mat<S>::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(Mat<S>::Zero(p.value.rows(), p.value.cols()));
      t_.push_back(0);
    }
  }

  void step(ParameterSet<S>& params, double lr) {
    if (!params.has_grads())
      throw ContractError("Adam::step called with no gradients populated");
    for (int i = 0; i < params.size(); ++i) {
      if (!params.grad_active(i)) continue;
      auto& p = params.at(i);
      auto& m = m_[static_cast<std::size_t>(i)];
      auto& v = v_[static_cast<std::size_t>(i)];
      auto& t = t_[static_cast<std::size_t>(i)];
      ++t;
      const S b1 = static_cast<S>(cfg_.beta1);
      const S b2 = static_cast<S>(cfg_.beta2);
      m = b1 * m + (S(1) - b1) * p.grad;
      v = b2 * v + (S(1) - b2) * p.grad.cwiseProduct(p.grad);
      const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t));
      const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t));
      const S scale = static_cast<S>(lr / bc1);
      const S inv_bc2 = static_cast<S>(1.0 / bc2);
      p.value.array() -= scale * m.array() /
                         ((v.array() * inv_bc2).sqrt() + static_cast<S>(cfg_.eps));
      if (!p.value.allFinite())
        throw NumericError("non-finite values in parameter '" + p.name +
                           "' after optimizer step");
    }
    params.set_has_grads(false);
  }

  /// Scales gradients so their global L2 norm is at most max_norm. No-op
  /// when max_norm <= 0.
  static void clip_global_norm(ParameterSet<S>& params, double max_norm) {
    if (max_norm <= 0.0) return;
    double sq = 0.0;
    for (auto& p : params) sq += static_cast<double>(p.grad.squaredNorm());
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
      const S f = static_cast<S>(max_norm / norm);
      for (auto& p : params) p.grad *= f;
    }
  }

  const AdamConfig& config() const { return cfg_; }
  std::vector<Mat<S>>& first_moments() { return m_; }
  std::vector<Mat<S>>& second_moments() { return v_; }
  std::vector<std::int64_t>& step_counts() { return t_; }
  std::int64_t max_step_count() const {
    std::int64_t mx = 0;
    for (auto t : t_) mx = std::max(mx, t);
    return mx;
  }

 private:
  AdamConfig cfg_;
  std::vector<Mat<S>> m_;
  std::vector<Mat<S>> v_;
  std::vector<std::int64_t> t_;
};

}  // namespace ppg
