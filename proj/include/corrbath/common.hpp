#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace corrbath {

using cplx = std::complex<double>;
using MatrixXc = Eigen::MatrixXcd;
using VectorXc = Eigen::VectorXcd;

inline constexpr cplx I_unit{0.0, 1.0};

/// Bad input: violated precondition or malformed configuration.
class InputError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed to reach its tolerance.
class ConvergenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline void require(bool cond, const std::string &what) {
  if (!cond) throw InputError(what);
}
} // namespace detail

} // namespace corrbath
