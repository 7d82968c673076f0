#pragma once

#include "optipmb/common.hpp"
#include "optipmb/motion.hpp"

#include <compare>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace optipmb {

/// N(x; mean, cov) over the motion state.
using GaussianDensity = MotionState;

/// Box extents and height: length, width, height (all > 0) and z center.
struct AuxState {
  double length = 1.0;
  double width = 1.0;
  double height = 1.0;
  double z = 0.0;

  friend bool operator==(const AuxState&, const AuxState&) = default;
};

/// Track identity: the frame that created the object and the measurement index
/// inside that frame. Printed as "k-m".
struct TrackId {
  int frame = 0;
  int measurement = 0;

  [[nodiscard]] std::string str() const { return std::to_string(frame) + "-" + std::to_string(measurement); }
  friend auto operator<=>(const TrackId&, const TrackId&) = default;
};

/// Non-motion state that never changes after creation.
struct TimeInvariantState {
  ClassLabel label;
  TrackId track_id;
};

/// One term of the undetected-object intensity.
struct PoissonComponent {
  double weight = 0.0;
  GaussianDensity density;
  ClassLabel label;
  int age = 0;
  /// Set when the component fed a first-time detection this step.
  bool marked = false;
};

/// One previously detected potential object.
struct BernoulliComponent {
  double existence = 0.0;
  GaussianDensity density;
  AuxState aux;
  TimeInvariantState fixed;
  int miss_count = 0;
  int track_len = 1;
  double score = 0.0;
};

struct PmbPosterior {
  std::vector<PoissonComponent> poisson;
  std::vector<BernoulliComponent> bernoulli;
  /// Ids that have been reported at least once.
  std::set<TrackId> extracted_ids;
};

/// log N(z; mean, s) for a 2-D Gaussian. Throws NumericalError if s is not PD.
inline double gaussian_position_log_likelihood(const Vector2& z, const Vector2& mean, const Matrix2& s) {
  Eigen::LLT<Matrix2> llt(s);
  if (llt.info() != Eigen::Success || !s.allFinite()) throw NumericalError("position covariance is not positive definite");
  const Matrix2 l = llt.matrixL();
  const Vector2 u = l.triangularView<Eigen::Lower>().solve(z - mean);
  const double log_det = 2.0 * (std::log(l(0, 0)) + std::log(l(1, 1)));
  return -0.5 * u.squaredNorm() - 0.5 * log_det - std::log(2.0 * std::numbers::pi);
}

inline double gaussian_position_likelihood(const Vector2& z, const Vector2& mean, const Matrix2& s) {
  return std::exp(gaussian_position_log_likelihood(z, mean, s));
}

struct WeightedGaussian {
  double weight = 0.0;
  GaussianDensity density;
};

/// Collapses a Gaussian mixture into one Gaussian with the same first two
/// moments. Heading is merged as wrapped residuals around the circular mean.
inline GaussianDensity moment_match(std::span<const WeightedGaussian> terms) {
  double total = 0.0;
  for (const auto& t : terms) {
    if (t.weight < 0.0 || !std::isfinite(t.weight)) throw std::invalid_argument("moment_match: negative or non-finite weight");
    total += t.weight;
  }
  if (!(total > 0.0)) throw std::invalid_argument("moment_match: weights sum to zero");
  if (terms.size() == 1) return terms.front().density;
  const double norm = std::abs(total - 1.0) > 1e-12 ? 1.0 / total : 1.0;

  double sin_sum = 0.0;
  double cos_sum = 0.0;
  Vector6 mean = Vector6::Zero();
  for (const auto& t : terms) {
    const double w = t.weight * norm;
    mean += w * t.density.mean;
    sin_sum += w * std::sin(t.density.mean(idx::kPhi));
    cos_sum += w * std::cos(t.density.mean(idx::kPhi));
  }
  const double ref = std::atan2(sin_sum, cos_sum);
  double phi_offset = 0.0;
  for (const auto& t : terms) phi_offset += t.weight * norm * wrap_angle(t.density.mean(idx::kPhi) - ref);
  mean(idx::kPhi) = wrap_angle(ref + phi_offset);

  Matrix6 cov = Matrix6::Zero();
  for (const auto& t : terms) {
    Vector6 d = t.density.mean - mean;
    d(idx::kPhi) = wrap_angle(d(idx::kPhi));
    cov += t.weight * norm * (t.density.cov + d * d.transpose());
  }
  symmetrize(cov);
  return {mean, cov};
}

}  // namespace optipmb
