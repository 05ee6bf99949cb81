#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ppg {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using Matd = Mat<double>;
using Vecd = Vec<double>;

/// Invalid configuration (bad key, bad value, incompatible settings).
/// The CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// API used out of contract (freeze before add, step on empty gradients, ...).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Non-finite values where finiteness is an invariant. Exit code 2.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("shape mismatch: " + what);
}

}  // namespace ppg
