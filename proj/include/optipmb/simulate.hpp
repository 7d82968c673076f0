#pragma once

#include "optipmb/filter.hpp"
#include "optipmb/io.hpp"
#include "optipmb/motion.hpp"
#include "optipmb/params.hpp"
#include "optipmb/tracker.hpp"
#include "optipmb/tracks.hpp"

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace optipmb {

/// Seeded random stream whose outputs are identical on every platform:
/// std::mt19937_64 bits are specified by the standard, and the conversions
/// below are written out instead of using the implementation-defined
/// std:: distributions.
class PortableRng {
 public:
  explicit PortableRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal by Box-Muller; one value per call.
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Poisson count by Knuth's product method, split into chunks of mean at
  /// most 30 so exp(-mean) never underflows.
  int poisson(double mean) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) throw std::invalid_argument("poisson: mean must be finite and >= 0");
    int total = 0;
    while (mean > 0.0) {
      const double chunk = std::min(mean, 30.0);
      mean -= chunk;
      const double limit = std::exp(-chunk);
      double prod = uniform();
      while (prod > limit) {
        ++total;
        prod *= uniform();
      }
    }
    return total;
  }

 private:
  std::mt19937_64 engine_;
};

/// Closed interval for uniformly drawn quantities.
struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// An object with a fixed initial state, alive on frames [birth, death).
struct ScriptedObject {
  Vector6 initial = Vector6::Zero();
  int birth = 0;
  int death = -1;  // -1: alive until the end
};

struct ScenarioConfig {
  RegionConfig region;
  int frames = 100;
  double dt = 0.5;
  ClassLabel label = "car";
  AuxState size{4.5, 2.0, 1.7, 0.0};

  /// Objects with random initial states, all born on the first frame.
  int random_objects = 0;
  Range speed{0.5, 5.0};
  Range turn_rate{-0.1, 0.1};
  Range accel{0.0, 0.0};
  std::vector<ScriptedObject> objects;

  double p_d = 1.0;
  Matrix5 r = Matrix5::Zero();
  double clutter_rate = 0.0;
  Range true_score{0.5, 1.0};
  Range clutter_score{0.1, 0.6};

  void validate() const {
    auto range_ok = [](const Range& r) { return std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi; };
    if (frames < 0) throw std::invalid_argument("scenario: frames must be >= 0");
    if (!(dt > 0.0)) throw std::invalid_argument("scenario: dt must be positive");
    if (!(region.area() > 0.0)) throw std::invalid_argument("scenario: region area must be positive");
    if (random_objects < 0) throw std::invalid_argument("scenario: random object count must be >= 0");
    if (!(p_d >= 0.0 && p_d <= 1.0)) throw std::invalid_argument("scenario: p_d must lie in [0, 1]");
    if (!(clutter_rate >= 0.0) || !std::isfinite(clutter_rate)) {
      throw std::invalid_argument("scenario: clutter rate must be finite and >= 0");
    }
    for (const Range* rg : {&speed, &turn_rate, &accel, &true_score, &clutter_score}) {
      if (!range_ok(*rg)) throw std::invalid_argument("scenario: every range needs lo <= hi");
    }
    if (true_score.lo <= 0.0 || true_score.hi > 1.0 || clutter_score.lo <= 0.0 || clutter_score.hi > 1.0) {
      throw std::invalid_argument("scenario: scores must lie in (0, 1]");
    }
    if (!r.isApprox(r.transpose()) || Eigen::SelfAdjointEigenSolver<Matrix5>(r).eigenvalues().minCoeff() < -1e-12) {
      throw std::invalid_argument("scenario: measurement noise must be symmetric positive semidefinite");
    }
    for (const auto& o : objects) {
      if (o.birth < 0 || (o.death >= 0 && o.death <= o.birth)) {
        throw std::invalid_argument("scenario: scripted object needs 0 <= birth < death");
      }
    }
  }
};

struct Simulation {
  /// Ground truth per frame, using the track record layout with score 1.
  std::vector<std::vector<TrackRecord>> truth;
  std::vector<FrameBundle> detections;
};

namespace detail {

/// Matrix root L with L L^T = cov, tolerant of singular covariances.
inline Matrix5 noise_root(const Matrix5& cov) {
  const Eigen::SelfAdjointEigenSolver<Matrix5> es(cov);
  const Vector5 sd = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * sd.asDiagonal();
}

}  // namespace detail

/// Generates noiseless CTRA ground truth and the matching detections.
///
/// Random draws happen per frame in this order: initial states of objects born
/// on the frame, measurement noise for every live object, detection and score
/// draws for every live object, the clutter count, then position, heading and
/// score of each clutter detection.
inline Simulation simulate(const ScenarioConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  PortableRng rng(seed);
  const Matrix5 root = detail::noise_root(cfg.r);

  struct Live {
    Vector6 state;
    int birth;
    int death;
    bool started = false;
  };
  std::vector<Live> objs;
  for (int i = 0; i < cfg.random_objects; ++i) objs.push_back({Vector6::Zero(), 0, -1});
  for (const auto& o : cfg.objects) objs.push_back({o.initial, o.birth, o.death});
  const auto random_count = static_cast<std::size_t>(cfg.random_objects);

  Simulation out;
  out.truth.reserve(static_cast<std::size_t>(cfg.frames));
  out.detections.reserve(static_cast<std::size_t>(cfg.frames));
  for (int k = 0; k < cfg.frames; ++k) {
    const double t = k * cfg.dt;
    std::vector<std::size_t> alive;
    for (std::size_t i = 0; i < objs.size(); ++i) {
      Live& o = objs[i];
      const bool live = k >= o.birth && (o.death < 0 || k < o.death);
      if (!live) continue;
      if (!o.started) {
        if (i < random_count) {
          o.state << rng.uniform(cfg.region.x_min, cfg.region.x_max), rng.uniform(cfg.region.y_min, cfg.region.y_max),
              rng.uniform(cfg.speed.lo, cfg.speed.hi), rng.uniform(-std::numbers::pi, std::numbers::pi),
              rng.uniform(cfg.turn_rate.lo, cfg.turn_rate.hi), rng.uniform(cfg.accel.lo, cfg.accel.hi);
        }
        o.started = true;
      } else {
        o.state = ctra_transition(o.state, cfg.dt);
      }
      alive.push_back(i);
    }

    std::vector<TrackRecord> truth;
    for (const std::size_t i : alive) {
      BernoulliComponent b;
      b.density.mean = objs[i].state;
      b.density.mean(idx::kPhi) = wrap_angle(b.density.mean(idx::kPhi));
      b.aux = cfg.size;
      b.fixed = {cfg.label, TrackId{objs[i].birth, static_cast<int>(i)}};
      b.score = 1.0;
      truth.push_back(make_track_record(b, k, t));
    }

    std::vector<Vector5> noise;
    for (std::size_t n = 0; n < alive.size(); ++n) {
      Vector5 w;
      for (int c = 0; c < 5; ++c) w(c) = rng.normal();
      noise.push_back(root * w);
    }

    FrameBundle frame{k, t, {}};
    for (std::size_t n = 0; n < alive.size(); ++n) {
      const double u_detect = rng.uniform();
      const double score = rng.uniform(cfg.true_score.lo, cfg.true_score.hi);
      if (!(u_detect < cfg.p_d)) continue;
      const Vector6& s = objs[alive[n]].state;
      const Vector5 z = measurement_fn(s) + noise[n];
      Detection d;
      d.xy = z.head<2>();
      d.velocity = z.segment<2>(2);
      d.yaw = wrap_angle(z(4));
      d.aux = cfg.size;
      d.label = cfg.label;
      d.score = score;
      frame.detections.push_back(std::move(d));
    }

    const int clutter = rng.poisson(cfg.clutter_rate);
    for (int c = 0; c < clutter; ++c) {
      Detection d;
      d.xy = {rng.uniform(cfg.region.x_min, cfg.region.x_max), rng.uniform(cfg.region.y_min, cfg.region.y_max)};
      d.velocity = Vector2::Zero();
      d.yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
      d.aux = cfg.size;
      d.label = cfg.label;
      d.score = rng.uniform(cfg.clutter_score.lo, cfg.clutter_score.hi);
      frame.detections.push_back(std::move(d));
    }

    out.truth.push_back(std::move(truth));
    out.detections.push_back(std::move(frame));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenario files

namespace detail {

inline Range range_from_json(const nlohmann::json& v, const char* name) {
  if (!v.is_array() || v.size() != 2) throw std::invalid_argument(std::string("scenario: '") + name + "' must be [lo, hi]");
  return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace detail

inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("scenario must be a JSON object");
  ScenarioConfig cfg;
  for (const auto& [key, v] : j.items()) {
    if (key == "region") {
      cfg.region.x_min = v.value("x_min", cfg.region.x_min);
      cfg.region.x_max = v.value("x_max", cfg.region.x_max);
      cfg.region.y_min = v.value("y_min", cfg.region.y_min);
      cfg.region.y_max = v.value("y_max", cfg.region.y_max);
    } else if (key == "frames") {
      cfg.frames = v.get<int>();
    } else if (key == "dt") {
      cfg.dt = v.get<double>();
    } else if (key == "class") {
      cfg.label = v.get<std::string>();
    } else if (key == "size") {
      const auto s = v.get<std::vector<double>>();
      if (s.size() != 4) throw std::invalid_argument("scenario: 'size' must be [l, w, h, z]");
      cfg.size = {s[0], s[1], s[2], s[3]};
    } else if (key == "random_objects") {
      cfg.random_objects = v.get<int>();
    } else if (key == "speed") {
      cfg.speed = detail::range_from_json(v, "speed");
    } else if (key == "turn_rate") {
      cfg.turn_rate = detail::range_from_json(v, "turn_rate");
    } else if (key == "accel") {
      cfg.accel = detail::range_from_json(v, "accel");
    } else if (key == "objects") {
      for (const auto& o : v) {
        ScriptedObject so;
        so.initial = detail::vec_from_json(o.at("state"));
        so.birth = o.value("birth", 0);
        so.death = o.value("death", -1);
        cfg.objects.push_back(so);
      }
    } else if (key == "p_d") {
      cfg.p_d = v.get<double>();
    } else if (key == "R") {
      cfg.r = detail::matrix_from_json<5>(v, "scenario 'R'");
    } else if (key == "clutter_rate") {
      cfg.clutter_rate = v.get<double>();
    } else if (key == "true_score") {
      cfg.true_score = detail::range_from_json(v, "true_score");
    } else if (key == "clutter_score") {
      cfg.clutter_score = detail::range_from_json(v, "clutter_score");
    } else {
      throw std::invalid_argument("scenario: unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in = detail::open_in(path);
  try {
    return scenario_from_json(nlohmann::json::parse(in));
  } catch (const std::exception& e) {
    throw ParseError(path, 0, e.what());
  }
}

}  // namespace optipmb
