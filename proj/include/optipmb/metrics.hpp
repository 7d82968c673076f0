#pragma once

#include "optipmb/association.hpp"
#include "optipmb/tracks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <vector>

namespace optipmb {

/// Similarity of a track and a ground-truth object from their BEV center
/// distance: 1 at zero distance, falling linearly to 0 at d0.
inline double similarity(double distance, double d0) {
  if (!(d0 > 0.0)) throw std::invalid_argument("similarity: d0 must be positive");
  return std::max(0.0, 1.0 - distance / d0);
}

inline double similarity(const TrackRecord& track, const TrackRecord& truth, double d0) {
  return similarity(std::hypot(track.x - truth.x, track.y - truth.y), d0);
}

struct MatchedPair {
  TrackId truth_id;
  TrackId track_id;
  double distance = 0.0;
};

/// Matching result of one frame.
struct FrameMatch {
  int frame = 0;
  std::vector<MatchedPair> pairs;
  std::size_t num_truth = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

/// Maximum-cardinality matching of same-class pairs within d0 (inclusive),
/// with the smallest total center distance among those.
inline FrameMatch match_frame(std::span<const TrackRecord> tracks, std::span<const TrackRecord> truth, double d0) {
  if (!(d0 > 0.0)) throw std::invalid_argument("match_frame: d0 must be positive");
  FrameMatch out;
  out.frame = truth.empty() ? (tracks.empty() ? 0 : tracks.front().frame) : truth.front().frame;
  out.num_truth = truth.size();
  const std::size_t n = truth.size();
  const std::size_t t = tracks.size();
  if (n > 0) {
    // Each ground truth may fall back to its own dummy column. The dummy cost
    // exceeds any total of real distances, so more matches always win.
    const double dummy = d0 * static_cast<double>(n + 1) + 1.0;
    CostMatrix c{Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(t + n), kInf), 0};
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      for (std::size_t j = 0; j < t; ++j) {
        if (tracks[j].label != truth[i].label) continue;
        const double d = std::hypot(tracks[j].x - truth[i].x, tracks[j].y - truth[i].y);
        if (d <= d0) c.cost(row, static_cast<Eigen::Index>(j)) = d;
      }
      c.cost(row, static_cast<Eigen::Index>(t + i)) = dummy;
    }
    const GlobalHypothesis g = solve_assignment(c);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = g.column_of_row[i];
      if (j >= t) continue;
      out.pairs.push_back({truth[i].track_id, tracks[j].track_id, c.cost(static_cast<Eigen::Index>(i),
                                                                          static_cast<Eigen::Index>(j))});
    }
  }
  out.tp = out.pairs.size();
  out.fn = n - out.tp;
  out.fp = t - out.tp;
  return out;
}

struct ClearMetrics {
  double mota = 0.0;
  double motp = 0.0;  // mean matched center distance (m)
  double mean_similarity = 0.0;
  std::size_t num_truth = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t ids = 0;
};

/// CLEAR-MOT totals over frames given in temporal order. An identity switch
/// is counted when a ground truth's matched track differs from the one at its
/// previous matched frame. With no ground truth the MOTA denominator is 1.
inline ClearMetrics clear_metrics(std::span<const FrameMatch> frames, double d0 = 2.0) {
  ClearMetrics m;
  std::map<TrackId, TrackId> last;
  double dist_sum = 0.0;
  double sim_sum = 0.0;
  for (const FrameMatch& f : frames) {
    m.num_truth += f.num_truth;
    m.tp += f.tp;
    m.fp += f.fp;
    m.fn += f.fn;
    for (const MatchedPair& p : f.pairs) {
      dist_sum += p.distance;
      sim_sum += similarity(p.distance, d0);
      const auto [it, inserted] = last.try_emplace(p.truth_id, p.track_id);
      if (!inserted) {
        if (it->second != p.track_id) ++m.ids;
        it->second = p.track_id;
      }
    }
  }
  const double denom = static_cast<double>(std::max<std::size_t>(m.num_truth, 1));
  m.mota = 1.0 - static_cast<double>(m.fn + m.fp + m.ids) / denom;
  if (m.tp > 0) {
    m.motp = dist_sum / static_cast<double>(m.tp);
    m.mean_similarity = sim_sum / static_cast<double>(m.tp);
  }
  return m;
}

/// Matches every frame that has tracks or ground truth, in frame order.
inline std::vector<FrameMatch> match_sequence(std::span<const TrackRecord> tracks, std::span<const TrackRecord> truth,
                                              double d0) {
  const auto by_track = group_by_frame(tracks);
  const auto by_truth = group_by_frame(truth);
  std::set<int> frames;
  for (const auto& [k, v] : by_track) frames.insert(k);
  for (const auto& [k, v] : by_truth) frames.insert(k);
  static const std::vector<TrackRecord> none;
  std::vector<FrameMatch> out;
  for (const int k : frames) {
    const auto it = by_track.find(k);
    const auto jt = by_truth.find(k);
    FrameMatch f = match_frame(it == by_track.end() ? none : it->second, jt == by_truth.end() ? none : jt->second, d0);
    f.frame = k;
    out.push_back(std::move(f));
  }
  return out;
}

inline ClearMetrics evaluate(std::span<const TrackRecord> tracks, std::span<const TrackRecord> truth, double d0 = 2.0) {
  const auto frames = match_sequence(tracks, truth, d0);
  return clear_metrics(frames, d0);
}

/// Recall-averaged MOTA over `recall_points` target recalls r = i / points.
/// For each target the highest score threshold reaching that recall is used
/// and its accuracy is normalized as
///   clamp(1 - (IDS + FP + FN - (1 - r) P) / (r P), 0, 1)
/// with P the number of ground-truth boxes; unreachable targets contribute 0.
/// This is a simplified stand-in for benchmark toolkits, which interpolate
/// operating points differently.
inline double amota(std::span<const TrackRecord> tracks, std::span<const TrackRecord> truth, int recall_points = 40,
                    double d0 = 2.0) {
  if (recall_points <= 0) throw std::invalid_argument("amota: recall_points must be positive");
  if (truth.empty() || tracks.empty()) return 0.0;
  std::vector<double> thresholds;
  for (const auto& r : tracks) thresholds.push_back(r.score);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const double p = static_cast<double>(truth.size());
  // Matching is maximum-cardinality, so recall never drops as the threshold
  // is lowered; the scan can stop once every box is matched.
  std::vector<std::pair<double, ClearMetrics>> points;
  std::vector<TrackRecord> kept;
  for (const double thr : thresholds) {
    kept.clear();
    for (const auto& r : tracks) {
      if (r.score >= thr) kept.push_back(r);
    }
    const ClearMetrics m = evaluate(kept, truth, d0);
    points.emplace_back(static_cast<double>(m.tp) / p, m);
    if (m.tp == truth.size()) break;
  }

  double sum = 0.0;
  for (int i = 1; i <= recall_points; ++i) {
    const double target = static_cast<double>(i) / recall_points;
    const auto it = std::find_if(points.begin(), points.end(),
                                 [&](const auto& pt) { return pt.first >= target - 1e-12; });
    if (it == points.end()) continue;
    const ClearMetrics& m = it->second;
    const double errors = static_cast<double>(m.ids + m.fp + m.fn) - (1.0 - target) * p;
    sum += std::clamp(1.0 - errors / (target * p), 0.0, 1.0);
  }
  return sum / recall_points;
}

}  // namespace optipmb
