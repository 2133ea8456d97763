#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace heun {

using Complex = std::complex<double>;
using Matrix2 = Eigen::Matrix2cd;
using Vector2 = Eigen::Vector2cd;

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr Complex kI{0.0, 1.0};

/// Failure categories. The CLI maps `invalid_argument` to exit code 2 and
/// everything numerical to exit code 3.
enum class ErrorKind {
  invalid_argument,
  pole,
  resonant,
  not_singular,
  did_not_converge,
  clearance,
  step_underflow,
  overflow,
  not_certified,
};

const char* to_string(ErrorKind kind);

class HeunError : public std::runtime_error {
 public:
  HeunError(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline double max_abs(const Matrix2& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace heun
