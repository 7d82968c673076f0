#pragma once

#include "optipmb/filter.hpp"
#include "optipmb/geometry.hpp"
#include "optipmb/params.hpp"

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

namespace optipmb {

inline BevBox bev_box(const Detection& d) { return {d.xy, d.aux.length, d.aux.width, d.yaw}; }

/// Per-class score filter followed by greedy BEV NMS (higher score wins; equal
/// scores keep the earlier detection). Output keeps input order.
inline std::vector<Detection> preprocess(std::span<const Detection> dets, const RunConfig& cfg) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].score >= cfg.params(dets[i].label).eta_sf) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  std::vector<char> keep(dets.size(), 0);
  std::vector<std::size_t> kept;
  for (const std::size_t i : order) {
    const double thr = cfg.params(dets[i].label).eta_iou;
    const BevBox box = bev_box(dets[i]);
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return dets[k].label == dets[i].label && bev_iou(bev_box(dets[k]), box) > thr;
    });
    if (!suppressed) {
      kept.push_back(i);
      keep[i] = 1;
    }
  }
  std::vector<Detection> out;
  out.reserve(kept.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (keep[i]) out.push_back(dets[i]);
  }
  return out;
}

}  // namespace optipmb
