#pragma once

#include "optipmb/association.hpp"
#include "optipmb/density.hpp"
#include "optipmb/filter.hpp"
#include "optipmb/params.hpp"
#include "optipmb/preprocess.hpp"
#include "optipmb/tracks.hpp"

#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace optipmb {

/// All detections of one time step.
struct FrameBundle {
  int frame = 0;
  double t = 0.0;
  std::vector<Detection> detections;
};

/// Sizes of the last processed step, for logging and tests.
struct StepStats {
  std::size_t measurements = 0;
  std::size_t objects_before = 0;
  std::size_t objects_after = 0;
  std::size_t poisson_after = 0;
  std::size_t births = 0;
  std::size_t extracted = 0;
};

/// Poisson multi-Bernoulli tracker for one scene.
///
/// Each step runs: predict, preprocess, misdetection / detection / first-time
/// detection hypotheses (HABM for ungated measurements), PPP update, optimal
/// assignment, Bernoulli and PPP pruning, light-weight non-motion update and
/// dual-threshold track extraction.
class Tracker {
 public:
  /// Optional LiDAR point count inside an object's predicted box. When unset,
  /// the count of the nearest gated detection is used.
  using PointCounter = std::function<std::optional<int>(const ClassLabel&, const Vector6&, const AuxState&)>;

  explicit Tracker(RunConfig cfg, PointCounter counter = {}) : cfg_(std::move(cfg)), counter_(std::move(counter)) {
    cfg_.validate();
  }

  std::vector<TrackRecord> step(const FrameBundle& frame) {
    double dt = cfg_.dt_fallback;
    if (last_t_) {
      dt = frame.t - *last_t_;
      if (!(dt > 0.0)) throw std::invalid_argument("Tracker::step: timestamps must increase strictly");
    }

    PmbPosterior pred = predict(pmb_, dt, cfg_);
    const std::vector<Detection> z = preprocess(frame.detections, cfg_);
    const std::size_t num_objects = pred.bernoulli.size();
    const std::size_t num_meas = z.size();

    auto detection_probability = [&](const ClassLabel& label, const Vector6& mean, const AuxState& aux) {
      const ClassParams& p = cfg_.params(label);
      const std::optional<int> pts =
          counter_ ? counter_(label, mean, aux) : estimate_point_count(mean.head<2>(), label, z, p.eta_dist);
      return adaptive_pd(p, pts);
    };

    // Hypotheses for previously detected objects.
    std::vector<ObjectHypotheses> objects(num_objects);
    std::vector<LocalHypothesis> costed;
    std::vector<PositionPrediction> object_pos(num_objects);
    for (std::size_t n = 0; n < num_objects; ++n) {
      const BernoulliComponent& b = pred.bernoulli[n];
      const ClassParams& p = cfg_.params(b.fixed.label);
      const double pd = detection_probability(b.fixed.label, b.density.mean, b.aux);
      object_pos[n] = predict_position_measurement(b.density, p.noise);
      objects[n].misdetection = hyp_misdetection(b, pd);
      objects[n].misdetection.object_index = n;
      for (const std::size_t m : gate_object(b, z, p.eta_dist)) {
        LocalHypothesis h = hyp_detection(b, z[m], pd, p, cfg_.ut);
        h.measurement_index = m;
        h.object_index = n;
        costed.push_back(h);
        objects[n].detections.push_back(std::move(h));
      }
    }

    // First-time detections, one new potential object per measurement.
    std::vector<double> ppp_pd(pred.poisson.size());
    for (std::size_t j = 0; j < pred.poisson.size(); ++j) {
      const PoissonComponent& c = pred.poisson[j];
      ppp_pd[j] = detection_probability(c.label, c.density.mean, AuxState{});
    }
    std::vector<LocalHypothesis> first(num_meas);
    std::vector<std::pair<Detection, double>> low_score;
    for (std::size_t m = 0; m < num_meas; ++m) {
      const ClassParams& p = cfg_.params(z[m].label);
      const double clutter = clutter_intensity(p, cfg_.region);
      const std::vector<std::size_t> gated = gate_measurement(z[m], pred.poisson, p.eta_dist);
      if (!gated.empty()) {
        FirstDetectionResult fd = hyp_first_detection_ppp(pred.poisson, gated, z[m], ppp_pd, clutter, p, cfg_.ut);
        for (const std::size_t j : fd.marks) pred.poisson[j].marked = true;
        first[m] = std::move(fd.hypothesis);
      } else {
        std::vector<PositionPrediction> same_class;
        for (std::size_t n = 0; n < num_objects; ++n) {
          if (pred.bernoulli[n].fixed.label == z[m].label) same_class.push_back(object_pos[n]);
        }
        const double p_a = association_probability(z[m], same_class);
        first[m] = habm_unused(z[m], p_a, clutter, p, cfg_.region);
        if (first[m].kind == HypothesisKind::clutter) low_score.emplace_back(z[m], p_a);
      }
      first[m].measurement_index = m;
      first[m].object_index = num_objects + m;
      costed.push_back(first[m]);
    }

    const std::vector<PoissonComponent> births = habm_birth_intensity(low_score, cfg_);
    std::vector<PoissonComponent> poisson = ppp_update(pred.poisson, ppp_pd, births);

    const CostMatrix cost = build_cost_matrix(costed, num_objects, num_meas);
    const GlobalHypothesis global = solve_assignment(cost);
    const std::vector<PrunedObject> kept = prune_bernoulli(objects, first, global, cfg_.existence_floor);
    poisson = prune_ppp(poisson, cfg_);

    std::vector<BernoulliComponent> bernoulli;
    bernoulli.reserve(kept.size());
    for (const PrunedObject& o : kept) {
      BernoulliComponent b = o.newborn ? lightweight_init(o.component, z[*o.measurement], frame.frame,
                                                          static_cast<int>(*o.measurement))
                                       : lightweight_update(o.component, o.measurement ? &z[*o.measurement] : nullptr);
      if (cfg_.max_miss_delete > 0 && b.miss_count >= cfg_.max_miss_delete) continue;
      bernoulli.push_back(std::move(b));
    }

    Extraction ex = extract_tracks(bernoulli, pmb_.extracted_ids, cfg_, frame.frame, frame.t);
    stats_ = {num_meas, num_objects, bernoulli.size(), poisson.size(), births.size(), ex.tracks.size()};
    pmb_.poisson = std::move(poisson);
    pmb_.bernoulli = std::move(bernoulli);
    pmb_.extracted_ids = std::move(ex.ids);
    last_t_ = frame.t;
    return std::move(ex.tracks);
  }

  [[nodiscard]] const PmbPosterior& posterior() const { return pmb_; }
  [[nodiscard]] const RunConfig& config() const { return cfg_; }
  [[nodiscard]] const StepStats& last_step() const { return stats_; }

  /// Restores a saved state; `last_t` is the timestamp of the step that produced it.
  void restore(PmbPosterior pmb, std::optional<double> last_t) {
    pmb_ = std::move(pmb);
    last_t_ = last_t;
  }
  [[nodiscard]] std::optional<double> last_time() const { return last_t_; }

 private:
  RunConfig cfg_;
  PointCounter counter_;
  PmbPosterior pmb_;
  std::optional<double> last_t_;
  StepStats stats_;
};

/// Inserts empty frames where frame indices skip, with linearly interpolated
/// timestamps, so misses are still accounted for.
inline std::vector<FrameBundle> fill_frame_gaps(std::span<const FrameBundle> frames) {
  std::vector<FrameBundle> out;
  out.reserve(frames.size());
  for (const FrameBundle& f : frames) {
    if (!out.empty()) {
      const int prev_frame = out.back().frame;
      const double prev_t = out.back().t;
      const int gap = f.frame - prev_frame;
      for (int k = 1; k < gap; ++k) {
        out.push_back({prev_frame + k, prev_t + (f.t - prev_t) * k / gap, {}});
      }
    }
    out.push_back(f);
  }
  return out;
}

/// Runs a fresh tracker over a whole scene; returns the tracks of every frame.
inline std::vector<std::vector<TrackRecord>> track_scene(const RunConfig& cfg, std::span<const FrameBundle> frames) {
  Tracker tracker(cfg);
  std::vector<std::vector<TrackRecord>> out;
  for (const FrameBundle& f : fill_frame_gaps(frames)) out.push_back(tracker.step(f));
  return out;
}

}  // namespace optipmb
