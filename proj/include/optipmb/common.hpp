#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace optipmb {

using Vector2 = Eigen::Vector2d;
using Matrix2 = Eigen::Matrix2d;
using Vector5 = Eigen::Matrix<double, 5, 1>;
using Matrix5 = Eigen::Matrix<double, 5, 5>;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

/// Object category, e.g. "car" or "pedestrian".
using ClassLabel = std::string;

/// Motion state layout: [x, y, v, phi, omega, a].
namespace idx {
inline constexpr int kX = 0;
inline constexpr int kY = 1;
inline constexpr int kV = 2;
inline constexpr int kPhi = 3;
inline constexpr int kOmega = 4;
inline constexpr int kAccel = 5;
}  // namespace idx

/// Raised when a covariance cannot be factorized or inverted.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Wraps an angle to [-pi, pi).
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (a >= -std::numbers::pi && a < std::numbers::pi) return a;
  double r = std::fmod(a + std::numbers::pi, two_pi);
  if (r < 0.0) r += two_pi;
  r -= std::numbers::pi;
  // fmod rounding can land exactly on +pi
  return r >= std::numbers::pi ? -std::numbers::pi : r;
}

/// log(exp(a) + exp(b)) without overflow; tolerates -inf operands.
inline double log_add_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

/// -log(x) with x floored at the smallest normal double so costs stay finite.
inline double safe_neg_log(double x) {
  return -std::log(std::max(x, std::numeric_limits<double>::min()));
}

template <typename Derived>
void symmetrize(Eigen::MatrixBase<Derived>& m) {
  m = (0.5 * (m + m.transpose())).eval();
}

}  // namespace optipmb
