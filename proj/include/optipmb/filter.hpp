#pragma once

#include "optipmb/common.hpp"
#include "optipmb/density.hpp"
#include "optipmb/motion.hpp"
#include "optipmb/params.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace optipmb {

/// One preprocessed 3-D box detection.
struct Detection {
  Vector2 xy = Vector2::Zero();
  Vector2 velocity = Vector2::Zero();
  double yaw = 0.0;
  AuxState aux;
  ClassLabel label;
  double score = 1.0;
  std::optional<int> lidar_pts;

  /// [x, y, vx, vy, yaw]
  [[nodiscard]] Vector5 motion_measurement() const {
    Vector5 z;
    z << xy.x(), xy.y(), velocity.x(), velocity.y(), yaw;
    return z;
  }
};

enum class HypothesisKind { misdetection, detection, first_detection, clutter };

/// A candidate association event for one potential object.
struct LocalHypothesis {
  HypothesisKind kind = HypothesisKind::misdetection;
  /// Negative log-likelihood ratio against the misdetection event.
  double cost = 0.0;
  BernoulliComponent component;
  std::optional<std::size_t> measurement_index;
  std::size_t object_index = 0;
};

/// Uniform clutter intensity mu_c / A.
inline double clutter_intensity(const ClassParams& params, const RegionConfig& region) {
  return params.mu_c / region.area();
}

/// Detection probability scaled down for sparsely observed (occluded) boxes.
/// Without a point count the baseline p_d0 is used.
inline double adaptive_pd(const ClassParams& params, std::optional<int> lidar_pts) {
  if (!lidar_pts) return params.p_d0;
  const double pts = std::max(0, *lidar_pts);
  return params.p_d0 * std::min(1.0, (1.0 - params.s_d) * pts / params.pts_0 + params.s_d);
}

/// Point count for a predicted object, taken from the nearest same-class
/// detection inside the gate that reports one.
inline std::optional<int> estimate_point_count(const Vector2& center, const ClassLabel& label,
                                               std::span<const Detection> dets, double eta_dist) {
  std::optional<int> best;
  double best_dist = kInf;
  for (const auto& d : dets) {
    if (d.label != label || !d.lidar_pts) continue;
    const double dist = (d.xy - center).norm();
    if (dist <= eta_dist && dist < best_dist) {
      best_dist = dist;
      best = d.lidar_pts;
    }
  }
  return best;
}

/// Survival-weighted UT prediction of every component. No birth is added here.
inline PmbPosterior predict(const PmbPosterior& pmb, double dt, const RunConfig& cfg) {
  PmbPosterior out;
  out.extracted_ids = pmb.extracted_ids;
  out.poisson.reserve(pmb.poisson.size());
  for (const auto& c : pmb.poisson) {
    const ClassParams& p = cfg.params(c.label);
    PoissonComponent n = c;
    n.weight = c.weight * p.p_s;
    n.density = predict_motion(c.density, dt, p.noise, cfg.ut);
    n.age = c.age + 1;
    n.marked = false;
    out.poisson.push_back(std::move(n));
  }
  out.bernoulli.reserve(pmb.bernoulli.size());
  for (const auto& b : pmb.bernoulli) {
    const ClassParams& p = cfg.params(b.fixed.label);
    BernoulliComponent n = b;
    n.existence = b.existence * p.p_s;
    n.density = predict_motion(b.density, dt, p.noise, cfg.ut);
    out.bernoulli.push_back(std::move(n));
  }
  return out;
}

/// Object missed this step: existence shrinks, density unchanged.
inline LocalHypothesis hyp_misdetection(const BernoulliComponent& bern, double p_d) {
  LocalHypothesis h;
  h.kind = HypothesisKind::misdetection;
  h.component = bern;
  const double r = bern.existence;
  const double num = r * (1.0 - p_d);
  const double den = 1.0 - r + num;
  h.component.existence = den > 0.0 ? num / den : 0.0;
  return h;
}

/// Object generated `det`. The cost uses the position-only model; the density is
/// the full 5-D UKF update. Existence becomes 1.
inline LocalHypothesis hyp_detection(const BernoulliComponent& bern, const Detection& det, double p_d,
                                     const ClassParams& params, const UtParams& ut = {}) {
  const PositionPrediction pred = predict_position_measurement(bern.density, params.noise);
  const double log_lik = gaussian_position_log_likelihood(det.xy, pred.z_hat, pred.s);
  const double r = bern.existence;

  LocalHypothesis h;
  h.kind = HypothesisKind::detection;
  if (r > 0.0 && p_d > 0.0) {
    const double log_miss = std::log(std::max(1.0 - r * p_d, std::numeric_limits<double>::min()));
    h.cost = -(std::log(r) + std::log(p_d) + log_lik - log_miss);
  } else {
    h.cost = kInf;
  }
  h.component = bern;
  h.component.existence = 1.0;
  h.component.density = ukf_update(bern.density, det.motion_measurement(), params.noise, ut);
  return h;
}

/// Mean of a newborn object: measured position, speed and course from the
/// measured velocity, zero turn rate and acceleration.
inline Vector6 newborn_mean(const Detection& det) {
  Vector6 m;
  m << det.xy.x(), det.xy.y(), det.velocity.norm(), std::atan2(det.velocity.y(), det.velocity.x()), 0.0, 0.0;
  return m;
}

struct FirstDetectionResult {
  LocalHypothesis hypothesis;
  /// Indices into the Poisson list that contributed and must be pruned.
  std::vector<std::size_t> marks;
};

/// First-time detection of an undetected object drawn from the gated Poisson
/// components `gated` (indices into `poisson`); `p_d` is indexed like `poisson`.
inline FirstDetectionResult hyp_first_detection_ppp(std::span<const PoissonComponent> poisson,
                                                    std::span<const std::size_t> gated, const Detection& det,
                                                    std::span<const double> p_d, double clutter,
                                                    const ClassParams& params, const UtParams& ut = {}) {
  if (gated.empty()) throw std::invalid_argument("hyp_first_detection_ppp: empty gate");
  std::vector<double> log_e(gated.size());
  std::vector<WeightedGaussian> updated(gated.size());
  double log_e_sum = -kInf;
  for (std::size_t i = 0; i < gated.size(); ++i) {
    const PoissonComponent& c = poisson[gated[i]];
    const PositionPrediction pred = predict_position_measurement(c.density, params.noise);
    const double log_lik = gaussian_position_log_likelihood(det.xy, pred.z_hat, pred.s);
    const double w = c.weight * p_d[gated[i]];
    log_e[i] = w > 0.0 ? std::log(w) + log_lik : -kInf;
    log_e_sum = log_add_exp(log_e_sum, log_e[i]);
    updated[i].density = ukf_update(c.density, det.motion_measurement(), params.noise, ut);
  }
  const double log_clutter = clutter > 0.0 ? std::log(clutter) : -kInf;
  const double log_total = log_add_exp(log_e_sum, log_clutter);

  FirstDetectionResult out;
  LocalHypothesis& h = out.hypothesis;
  h.kind = HypothesisKind::first_detection;
  h.cost = std::isfinite(log_total) ? -log_total : safe_neg_log(0.0);
  h.component.existence = std::isfinite(log_total) ? std::exp(log_e_sum - log_total) : 0.0;
  for (std::size_t i = 0; i < gated.size(); ++i) {
    updated[i].weight = std::isfinite(log_e_sum) ? std::exp(log_e[i] - log_e_sum) : 1.0;
  }
  h.component.density = moment_match(updated);
  h.component.aux = det.aux;
  h.component.fixed.label = det.label;
  out.marks.assign(gated.begin(), gated.end());
  return out;
}

/// Chance that `det` belongs to an existing object: the summed position
/// likelihoods against each object's predicted measurement, capped at 1.
inline double association_probability(const Detection& det, std::span<const PositionPrediction> objects) {
  double sum = 0.0;
  for (const auto& o : objects) sum += gaussian_position_likelihood(det.xy, o.z_hat, o.s);
  return std::min(1.0, sum);
}

/// Same as above over the same-class objects in `objects`.
inline double association_probability(const Detection& det, std::span<const BernoulliComponent> objects,
                                      const RunConfig& cfg) {
  std::vector<PositionPrediction> preds;
  for (const auto& b : objects) {
    if (b.fixed.label != det.label) continue;
    preds.push_back(predict_position_measurement(b.density, cfg.params(b.fixed.label).noise));
  }
  return association_probability(det, preds);
}

/// First-time detection for a measurement no Poisson component explains.
/// Low scores become clutter (r = 0, dropped at pruning); high scores start a
/// newborn object with r = 1 at the measurement-derived mean.
inline LocalHypothesis habm_unused(const Detection& det, double p_a, double clutter, const ClassParams& params,
                                   const RegionConfig& region) {
  LocalHypothesis h;
  h.component.aux = det.aux;
  h.component.fixed.label = det.label;
  if (det.score < params.eta_score) {
    h.kind = HypothesisKind::clutter;
    h.cost = safe_neg_log(clutter);
    h.component.existence = 0.0;
    h.component.density = {newborn_mean(det), params.newborn_cov};
    return h;
  }
  h.kind = HypothesisKind::first_detection;
  h.cost = safe_neg_log(params.mu_b0 * (1.0 - p_a) / region.area() + clutter);
  h.component.existence = 1.0;
  h.component.density = {newborn_mean(det), params.newborn_cov};
  return h;
}

/// Measurement-driven Poisson birth from this step's low-score unused
/// detections, each paired with its association probability.
inline std::vector<PoissonComponent> habm_birth_intensity(std::span<const std::pair<Detection, double>> low_score,
                                                          const RunConfig& cfg) {
  std::vector<PoissonComponent> out;
  out.reserve(low_score.size());
  for (const auto& [det, p_a] : low_score) {
    const ClassParams& p = cfg.params(det.label);
    PoissonComponent c;
    c.weight = p.mu_ab * (1.0 - p_a);
    c.density = {newborn_mean(det), p.newborn_cov};
    c.label = det.label;
    out.push_back(std::move(c));
  }
  return out;
}

/// Undetected components keep their density and lose the detected mass
/// (factor 1 - p_d); births are appended.
inline std::vector<PoissonComponent> ppp_update(std::span<const PoissonComponent> predicted,
                                                std::span<const double> p_d,
                                                std::span<const PoissonComponent> birth) {
  if (p_d.size() != predicted.size()) throw std::invalid_argument("ppp_update: p_d size mismatch");
  std::vector<PoissonComponent> out(predicted.begin(), predicted.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i].weight *= 1.0 - p_d[i];
  out.insert(out.end(), birth.begin(), birth.end());
  return out;
}

}  // namespace optipmb
