#pragma once

#include "optipmb/association.hpp"
#include "optipmb/density.hpp"
#include "optipmb/filter.hpp"
#include "optipmb/params.hpp"

#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <vector>

namespace optipmb {

/// One reported object at one frame.
struct TrackRecord {
  TrackId track_id;
  ClassLabel label;
  int frame = 0;
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
  Vector2 velocity = Vector2::Zero();
  AuxState aux;
  double score = 0.0;
};

/// All local hypotheses of one previously detected object.
struct ObjectHypotheses {
  LocalHypothesis misdetection;
  std::vector<LocalHypothesis> detections;
};

/// A Bernoulli kept by pruning together with how it was explained this step.
struct PrunedObject {
  BernoulliComponent component;
  /// Measurement generated by this object, if any.
  std::optional<std::size_t> measurement;
  /// True when the object was created by a first-time detection this step.
  bool newborn = false;
};

/// Keeps the one local hypothesis per object selected by `global`. Clutter
/// hypotheses and components with existence below `existence_floor` are dropped.
inline std::vector<PrunedObject> prune_bernoulli(std::span<const ObjectHypotheses> objects,
                                                 std::span<const LocalHypothesis> first_detections,
                                                 const GlobalHypothesis& global, double existence_floor) {
  const std::size_t num_objects = objects.size();
  std::vector<std::optional<std::size_t>> measurement_of_object(num_objects);
  std::vector<PrunedObject> out;
  for (std::size_t m = 0; m < global.size(); ++m) {
    const std::size_t col = global.column_of_row[m];
    if (col < num_objects) measurement_of_object[col] = m;
  }
  for (std::size_t n = 0; n < num_objects; ++n) {
    PrunedObject p;
    if (const auto m = measurement_of_object[n]) {
      const LocalHypothesis* chosen = nullptr;
      for (const auto& h : objects[n].detections) {
        if (h.measurement_index == m) chosen = &h;
      }
      if (chosen == nullptr) throw std::logic_error("prune_bernoulli: assignment to an ungated pair");
      p.component = chosen->component;
      p.measurement = m;
    } else {
      p.component = objects[n].misdetection.component;
    }
    if (p.component.existence >= existence_floor) out.push_back(std::move(p));
  }
  for (std::size_t m = 0; m < global.size(); ++m) {
    if (global.column_of_row[m] != num_objects + m) continue;
    const LocalHypothesis& h = first_detections[m];
    if (h.kind == HypothesisKind::clutter || h.component.existence < existence_floor) continue;
    out.push_back({h.component, m, true});
  }
  return out;
}

/// Drops marked components and those older than eta_step.
inline std::vector<PoissonComponent> prune_ppp(std::span<const PoissonComponent> poisson, int eta_step) {
  std::vector<PoissonComponent> out;
  for (const auto& c : poisson) {
    if (!c.marked && c.age <= eta_step) out.push_back(c);
  }
  return out;
}

/// Per-class variant using each component's eta_step.
inline std::vector<PoissonComponent> prune_ppp(std::span<const PoissonComponent> poisson, const RunConfig& cfg) {
  std::vector<PoissonComponent> out;
  for (const auto& c : poisson) {
    if (!c.marked && c.age <= cfg.params(c.label).eta_step) out.push_back(c);
  }
  return out;
}

/// Confidence grows with track length and is capped by the detection score.
inline double confidence_score(int track_len, double detection_score) {
  return (1.0 - std::exp(-static_cast<double>(track_len))) * detection_score;
}

/// Non-motion update of a surviving object. An associated detection blends the
/// box by its score and resets the miss counter; a miss zeroes the score.
inline BernoulliComponent lightweight_update(BernoulliComponent bern, const Detection* assoc) {
  bern.track_len += 1;
  if (assoc != nullptr) {
    const double s = assoc->score;
    bern.aux.length = (1.0 - s) * bern.aux.length + s * assoc->aux.length;
    bern.aux.width = (1.0 - s) * bern.aux.width + s * assoc->aux.width;
    bern.aux.height = (1.0 - s) * bern.aux.height + s * assoc->aux.height;
    bern.aux.z = (1.0 - s) * bern.aux.z + s * assoc->aux.z;
    bern.miss_count = 0;
    bern.score = confidence_score(bern.track_len, s);
  } else {
    bern.miss_count += 1;
    bern.score = 0.0;
  }
  return bern;
}

/// Non-motion state of an object created from measurement m of frame k.
inline BernoulliComponent lightweight_init(BernoulliComponent bern, const Detection& det, int k, int m) {
  bern.fixed = {det.label, TrackId{k, m}};
  bern.aux = det.aux;
  bern.miss_count = 0;
  bern.track_len = 1;
  bern.score = confidence_score(1, det.score);
  return bern;
}

inline TrackRecord make_track_record(const BernoulliComponent& b, int frame, double t) {
  TrackRecord r;
  r.track_id = b.fixed.track_id;
  r.label = b.fixed.label;
  r.frame = frame;
  r.t = t;
  r.x = b.density.mean(idx::kX);
  r.y = b.density.mean(idx::kY);
  r.yaw = b.density.mean(idx::kPhi);
  const double v = b.density.mean(idx::kV);
  r.velocity = Vector2(v * std::cos(r.yaw), v * std::sin(r.yaw));
  r.aux = b.aux;
  r.score = b.score;
  return r;
}

struct Extraction {
  std::vector<TrackRecord> tracks;
  std::set<TrackId> ids;
};

/// Dual-threshold extraction. Unseen ids need r >= eta_ext1; previously
/// reported ids need r >= eta_ext2 and fewer than eta_cnt consecutive misses.
/// Returned ids are `prev_ids` plus everything reported now.
inline Extraction extract_tracks(std::span<const BernoulliComponent> bernoulli, const std::set<TrackId>& prev_ids,
                                 const RunConfig& cfg, int frame, double t) {
  Extraction out;
  out.ids = prev_ids;
  for (const auto& b : bernoulli) {
    const ClassParams& p = cfg.params(b.fixed.label);
    const bool known = prev_ids.contains(b.fixed.track_id);
    const bool report = known ? (b.existence >= p.eta_ext2 && b.miss_count < p.eta_cnt) : b.existence >= p.eta_ext1;
    if (!report) continue;
    out.tracks.push_back(make_track_record(b, frame, t));
    out.ids.insert(b.fixed.track_id);
  }
  return out;
}

}  // namespace optipmb
