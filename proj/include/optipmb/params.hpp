#pragma once

#include "optipmb/common.hpp"
#include "optipmb/motion.hpp"

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace optipmb {

/// Per-class tuning. Field names follow the tuned-parameter table; the
/// covariances are not part of it and carry project defaults.
struct ClassParams {
  double eta_sf = 0.1;      // score filter threshold
  double eta_iou = 0.1;     // NMS IoU threshold
  double p_s = 0.99;        // survival probability
  double eta_dist = 10.0;   // gating distance (m)
  double p_d0 = 0.9;        // baseline detection probability
  double pts_0 = 10.0;      // expected LiDAR point count
  double s_d = 0.5;         // minimal detection-probability scale
  double eta_score = 0.25;  // HABM score threshold
  double mu_ab = 2.0;       // adaptive birth rate
  double mu_b0 = 2.0;       // undetected-object birth rate
  double mu_c = 1.0;        // clutter rate
  int eta_step = 3;         // max Poisson component age
  double eta_ext1 = 0.7;    // extraction threshold for new tracks
  double eta_ext2 = 0.8;    // extraction threshold for known tracks
  int eta_cnt = 2;          // misdetection counter limit

  Matrix6 newborn_cov = default_newborn_cov();
  NoiseConfig noise = default_noise();

  static Matrix6 default_newborn_cov() {
    return Vector6(0.5, 0.5, 4.0, 0.5, 0.1, 1.0).asDiagonal();
  }

  /// Q is per second of elapsed time.
  static NoiseConfig default_noise() {
    NoiseConfig n;
    n.q = Vector6(0.1, 0.1, 1.0, 0.05, 0.1, 1.0).asDiagonal();
    n.r = Vector5(0.25, 0.25, 1.0, 1.0, 0.1).asDiagonal();
    return n;
  }

  void validate(const std::string& label) const {
    auto fail = [&](const char* what) {
      throw std::invalid_argument("class '" + label + "': " + what);
    };
    auto prob = [](double p) { return p > 0.0 && p <= 1.0; };
    if (!prob(p_s) || !prob(p_d0) || !prob(s_d)) fail("p_s, p_d0 and s_d must lie in (0, 1]");
    if (eta_ext1 > eta_ext2) fail("eta_ext1 must not exceed eta_ext2");
    if (mu_ab < 0.0 || mu_b0 < 0.0 || mu_c < 0.0) fail("rates must be non-negative");
    if (eta_step < 1 || eta_cnt < 1) fail("eta_step and eta_cnt must be at least 1");
    if (eta_dist <= 0.0 || pts_0 <= 0.0) fail("eta_dist and pts_0 must be positive");
  }
};

/// Observation region; clutter and HABM births are uniform over it.
struct RegionConfig {
  double x_min = -50.0;
  double x_max = 50.0;
  double y_min = -50.0;
  double y_max = 50.0;

  [[nodiscard]] double area() const { return (x_max - x_min) * (y_max - y_min); }
};

struct RunConfig {
  std::map<ClassLabel, ClassParams> classes;
  RegionConfig region;
  UtParams ut;
  std::uint64_t seed = 0;
  /// Used for the first frame and wherever timestamps cannot supply dt.
  double dt_fallback = 0.5;
  /// Bernoulli components below this existence are deleted.
  double existence_floor = 1e-4;
  /// Delete a Bernoulli after this many consecutive misses; 0 disables.
  int max_miss_delete = 0;

  [[nodiscard]] const ClassParams& params(const ClassLabel& label) const {
    const auto it = classes.find(label);
    if (it == classes.end()) throw std::out_of_range("no parameters for class '" + label + "'");
    return it->second;
  }

  void validate() const {
    if (classes.empty()) throw std::invalid_argument("config defines no classes");
    for (const auto& [label, p] : classes) p.validate(label);
    if (!(region.area() > 0.0)) throw std::invalid_argument("region area must be positive");
    if (!(dt_fallback > 0.0)) throw std::invalid_argument("dt_fallback must be positive");
  }
};

namespace presets {

inline ClassParams make(double sf, double ps, double dist, double pd0, double sd, double score, double ab, double b0,
                        double c, int step, double ext1, double ext2, int cnt) {
  ClassParams p;
  p.eta_sf = sf;
  p.eta_iou = 0.1;
  p.p_s = ps;
  p.eta_dist = dist;
  p.p_d0 = pd0;
  p.pts_0 = 10.0;
  p.s_d = sd;
  p.eta_score = score;
  p.mu_ab = ab;
  p.mu_b0 = b0;
  p.mu_c = c;
  p.eta_step = step;
  p.eta_ext1 = ext1;
  p.eta_ext2 = ext2;
  p.eta_cnt = cnt;
  return p;
}

/// Tuned values for the seven nuScenes categories.
inline std::map<ClassLabel, ClassParams> nuscenes() {
  return {
      {"bicycle", make(0.15, 0.99, 3, 0.8, 0.5, 0.17, 2, 1, 0.5, 3, 0.7, 0.95, 3)},
      {"bus", make(0.0, 0.99, 10, 0.9, 0.5, 0.3, 2, 5, 0.2, 3, 0.7, 0.7, 2)},
      {"car", make(0.1, 0.99, 10, 0.9, 0.5, 0.25, 2, 2, 1, 3, 0.7, 0.8, 2)},
      {"motorcycle", make(0.16, 0.99, 4, 0.8, 0.5, 0.18, 2, 1, 0.5, 2, 0.7, 0.95, 2)},
      {"pedestrian", make(0.2, 0.99, 3, 0.8, 0.5, 0.2, 2, 1, 0.5, 2, 0.7, 0.8, 2)},
      {"trailer", make(0.1, 0.99, 10, 0.9, 0.5, 0.15, 2, 2, 0.5, 2, 0.7, 0.8, 2)},
      {"truck", make(0.0, 0.99, 10, 0.9, 0.5, 0.15, 2, 2, 1, 2, 0.5, 0.9, 2)},
  };
}

inline ClassParams nuscenes_car() { return nuscenes().at("car"); }

/// Tuned values for KITTI cars.
inline ClassParams kitti_car() { return make(0.3, 1.0, 4, 0.9, 0.7, 0.65, 0.2, 0.5, 10, 1, 0.85, 0.9, 5); }

}  // namespace presets

}  // namespace optipmb
