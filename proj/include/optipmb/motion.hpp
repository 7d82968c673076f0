#pragma once

#include "optipmb/common.hpp"

#include <array>
#include <optional>
#include <span>
#include <type_traits>
#include <utility>

namespace optipmb {

/// Gaussian belief over the motion state [x, y, v, phi, omega, a].
struct MotionState {
  Vector6 mean = Vector6::Zero();
  Matrix6 cov = Matrix6::Zero();
};

/// Process noise Q is a rate: predict_motion adds Q * dt.
struct NoiseConfig {
  Matrix6 q = Matrix6::Identity();
  Matrix5 r = Matrix5::Identity();

  /// Position block of R used by the association-cost measurement model.
  [[nodiscard]] Matrix2 r_xy() const { return r.topLeftCorner<2, 2>(); }
};

/// Scaled unscented transform spread. kappa defaults to 3 - n.
struct UtParams {
  double alpha = 1.0;
  double beta = 2.0;
  std::optional<double> kappa;

  [[nodiscard]] double lambda(int n) const {
    const double k = kappa.value_or(3.0 - n);
    return alpha * alpha * (n + k) - n;
  }
};

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;
template <int N>
using Mat = Eigen::Matrix<double, N, N>;

template <int M>
struct MomentPair {
  Vec<M> mean;
  Mat<M> cov;
};

namespace detail {

template <int N>
std::optional<Mat<N>> try_sqrt_factor(const Mat<N>& cov) {
  Eigen::LLT<Mat<N>> llt(cov);
  if (llt.info() == Eigen::Success) return Mat<N>(llt.matrixL());

  // Semidefinite fallback: pivoted LDLT, tiny negative pivots clamped to zero.
  Eigen::LDLT<Mat<N>> ldlt(cov);
  if (ldlt.info() != Eigen::Success) return std::nullopt;
  const double scale = std::max(cov.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  Vec<N> d = ldlt.vectorD();
  for (int i = 0; i < N; ++i) {
    if (!std::isfinite(d(i)) || d(i) < -1e-12 * scale) return std::nullopt;
    d(i) = std::max(d(i), 0.0);
  }
  Mat<N> l = ldlt.matrixL();
  Mat<N> a = ldlt.transpositionsP().transpose() * (l * d.cwiseSqrt().asDiagonal());
  return a;
}

}  // namespace detail

/// Returns A with A * A^T == cov. On failure adds 1e-9 * trace(P) / n * I once,
/// then throws NumericalError.
template <int N>
Mat<N> sqrt_factor(const Mat<N>& cov) {
  if (!cov.allFinite()) throw NumericalError("covariance has non-finite entries");
  if (auto a = detail::try_sqrt_factor<N>(cov)) return *a;
  const double jitter = 1e-9 * std::abs(cov.trace()) / N;
  Mat<N> jittered = cov;
  jittered.diagonal().array() += jitter;
  if (auto a = detail::try_sqrt_factor<N>(jittered)) return *a;
  throw NumericalError("covariance is not positive semidefinite");
}

template <int N>
struct SigmaPoints {
  std::array<Vec<N>, 2 * N + 1> points;
  /// points[i] - mean, stored directly so no angle wrapping is needed.
  std::array<Vec<N>, 2 * N + 1> offsets;
  double wm0 = 0.0;
  double wc0 = 0.0;
  double wi = 0.0;

  [[nodiscard]] double wm(int i) const { return i == 0 ? wm0 : wi; }
  [[nodiscard]] double wc(int i) const { return i == 0 ? wc0 : wi; }
};

template <int N>
SigmaPoints<N> make_sigma_points(const Vec<N>& mean, const Mat<N>& cov, const UtParams& ut) {
  const double lambda = ut.lambda(N);
  const double spread = N + lambda;
  if (!(spread > 0.0)) throw NumericalError("unscented transform spread n + lambda must be positive");
  const Mat<N> a = sqrt_factor<N>(cov) * std::sqrt(spread);

  SigmaPoints<N> sp;
  sp.points[0] = mean;
  sp.offsets[0].setZero();
  for (int i = 0; i < N; ++i) {
    sp.offsets[1 + i] = a.col(i);
    sp.offsets[1 + N + i] = -a.col(i);
    sp.points[1 + i] = mean + a.col(i);
    sp.points[1 + N + i] = mean - a.col(i);
  }
  sp.wm0 = lambda / spread;
  sp.wc0 = sp.wm0 + 1.0 - ut.alpha * ut.alpha + ut.beta;
  sp.wi = 1.0 / (2.0 * spread);
  return sp;
}

namespace detail {

/// Weighted mean of transformed sigma points. Angular channels are averaged as
/// wrapped residuals around the central point, which is exact for affine maps.
template <int M, std::size_t K, typename WeightFn>
Vec<M> weighted_mean(const std::array<Vec<M>, K>& ys, WeightFn&& w, std::span<const int> angular) {
  Vec<M> mean = Vec<M>::Zero();
  for (std::size_t i = 0; i < K; ++i) mean += w(static_cast<int>(i)) * ys[i];
  for (const int k : angular) {
    const double ref = ys[0](k);
    double acc = 0.0;
    for (std::size_t i = 0; i < K; ++i) acc += w(static_cast<int>(i)) * wrap_angle(ys[i](k) - ref);
    mean(k) = wrap_angle(ref + acc);
  }
  return mean;
}

template <int M>
Vec<M> residual(const Vec<M>& y, const Vec<M>& mean, std::span<const int> angular) {
  Vec<M> d = y - mean;
  for (const int k : angular) d(k) = wrap_angle(d(k));
  return d;
}

}  // namespace detail

/// Propagates N(mean, cov) through fn with the unscented transform.
/// `angular_outputs` lists output channels holding angles.
template <int N, typename Fn>
auto ut_propagate(const Vec<N>& mean, const Mat<N>& cov, Fn&& fn, const UtParams& ut = {},
                  std::span<const int> angular_outputs = {}) {
  using Out = std::decay_t<decltype(fn(std::declval<const Vec<N>&>()))>;
  constexpr int M = Out::RowsAtCompileTime;
  static_assert(M != Eigen::Dynamic, "fn must return a fixed-size vector");

  const SigmaPoints<N> sp = make_sigma_points<N>(mean, cov, ut);
  std::array<Vec<M>, 2 * N + 1> ys;
  for (int i = 0; i < 2 * N + 1; ++i) ys[i] = fn(sp.points[i]);

  MomentPair<M> out;
  out.mean = detail::weighted_mean<M>(ys, [&](int i) { return sp.wm(i); }, angular_outputs);
  out.cov.setZero();
  for (int i = 0; i < 2 * N + 1; ++i) {
    const Vec<M> d = detail::residual<M>(ys[i], out.mean, angular_outputs);
    out.cov += sp.wc(i) * d * d.transpose();
  }
  symmetrize(out.cov);
  return out;
}

/// Turn rates below this use the straight-line constant-acceleration limit.
inline constexpr double kCtraOmegaEpsilon = 1e-6;

namespace detail {

/// Closed-form CTRA position increment, arranged with half-angle identities so
/// small turn rates do not cancel catastrophically.
inline Vector6 ctra_closed_form(const Vector6& s, double dt) {
  const double v = s(idx::kV), phi = s(idx::kPhi), w = s(idx::kOmega), a = s(idx::kAccel);
  const double dphi = w * dt;
  const double phi1 = phi + dphi;
  const double phim = phi + 0.5 * dphi;
  const double half = std::sin(0.5 * dphi);
  const double w2 = w * w;

  Vector6 out = s;
  out(idx::kX) += 2.0 * v / w * std::cos(phim) * half + a / w2 * (dphi * std::sin(phi1) - 2.0 * std::sin(phim) * half);
  out(idx::kY) += 2.0 * v / w * std::sin(phim) * half + a / w2 * (-dphi * std::cos(phi1) + 2.0 * std::cos(phim) * half);
  out(idx::kV) = v + a * dt;
  out(idx::kPhi) = wrap_angle(phi1);
  return out;
}

inline Vector6 ctra_straight_line(const Vector6& s, double dt) {
  const double v = s(idx::kV), phi = s(idx::kPhi), a = s(idx::kAccel);
  const double dist = v * dt + 0.5 * a * dt * dt;
  Vector6 out = s;
  out(idx::kX) += dist * std::cos(phi);
  out(idx::kY) += dist * std::sin(phi);
  out(idx::kV) = v + a * dt;
  out(idx::kPhi) = wrap_angle(phi + s(idx::kOmega) * dt);
  return out;
}

}  // namespace detail

/// Noiseless constant turn rate and acceleration propagation over dt seconds.
inline Vector6 ctra_transition(const Vector6& s, double dt) {
  if (dt == 0.0) return s;
  if (std::abs(s(idx::kOmega)) < kCtraOmegaEpsilon) return detail::ctra_straight_line(s, dt);
  return detail::ctra_closed_form(s, dt);
}

/// UT prediction through CTRA plus Q * dt. dt == 0 returns the input unchanged.
inline MotionState predict_motion(const MotionState& state, double dt, const NoiseConfig& noise,
                                  const UtParams& ut = {}) {
  if (dt < 0.0) throw std::invalid_argument("predict_motion: negative dt");
  if (dt == 0.0) return state;
  static constexpr std::array<int, 1> kAngular{idx::kPhi};
  const auto moments = ut_propagate<6>(
      state.mean, state.cov, [dt](const Vector6& s) { return ctra_transition(s, dt); }, ut, kAngular);
  MotionState out{moments.mean, moments.cov + noise.q * dt};
  symmetrize(out.cov);
  return out;
}

/// Full measurement model [x, y, v cos(phi), v sin(phi), phi].
inline Vector5 measurement_fn(const Vector6& s) {
  const double v = s(idx::kV), phi = s(idx::kPhi);
  Vector5 z;
  z << s(idx::kX), s(idx::kY), v * std::cos(phi), v * std::sin(phi), phi;
  return z;
}

/// UKF measurement update with an arbitrary measurement function h: R^6 -> R^M.
/// Innovations on `angular_meas` channels are wrapped; the phi state entry is
/// re-wrapped after the update.
template <int M, typename H>
MotionState ukf_update(const MotionState& pred, const Vec<M>& z, const Mat<M>& r, H&& h,
                       std::span<const int> angular_meas, const UtParams& ut = {}) {
  const SigmaPoints<6> sp = make_sigma_points<6>(pred.mean, pred.cov, ut);
  std::array<Vec<M>, 13> zs;
  for (int i = 0; i < 13; ++i) zs[i] = h(sp.points[i]);

  const Vec<M> z_hat = detail::weighted_mean<M>(zs, [&](int i) { return sp.wm(i); }, angular_meas);
  Mat<M> s = r;
  Eigen::Matrix<double, 6, M> pxz = Eigen::Matrix<double, 6, M>::Zero();
  for (int i = 0; i < 13; ++i) {
    const Vec<M> dz = detail::residual<M>(zs[i], z_hat, angular_meas);
    s += sp.wc(i) * dz * dz.transpose();
    pxz += sp.wc(i) * sp.offsets[i] * dz.transpose();
  }
  symmetrize(s);

  Eigen::LLT<Mat<M>> llt(s);
  if (llt.info() != Eigen::Success) throw NumericalError("innovation covariance is singular");
  const Eigen::Matrix<double, 6, M> gain = llt.solve(pxz.transpose()).transpose();
  const Vec<M> innovation = detail::residual<M>(z, z_hat, angular_meas);

  MotionState out;
  out.mean = pred.mean + gain * innovation;
  out.mean(idx::kPhi) = wrap_angle(out.mean(idx::kPhi));
  out.cov = pred.cov - gain * s * gain.transpose();
  symmetrize(out.cov);
  return out;
}

/// UKF update with the full 5-D measurement model and the configured R.
inline MotionState ukf_update(const MotionState& pred, const Vector5& z, const NoiseConfig& noise,
                              const UtParams& ut = {}) {
  static constexpr std::array<int, 1> kAngular{4};
  return ukf_update<5>(pred, z, noise.r, measurement_fn, kAngular, ut);
}

/// Predicted position measurement (z_hat, S) for association costs.
struct PositionPrediction {
  Vector2 z_hat;
  Matrix2 s;
};

inline PositionPrediction predict_position_measurement(const MotionState& pred, const NoiseConfig& noise) {
  PositionPrediction out;
  out.z_hat = pred.mean.head<2>();
  out.s = pred.cov.topLeftCorner<2, 2>() + noise.r_xy();
  symmetrize(out.s);
  return out;
}

}  // namespace optipmb
