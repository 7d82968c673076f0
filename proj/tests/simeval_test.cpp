#include "random_costs.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace optipmb;
using namespace optipmb::testing;

namespace {

TrackRecord rec(TrackId id, int frame, double x, double y, double score = 1.0) {
  TrackRecord r;
  r.track_id = id;
  r.label = "car";
  r.frame = frame;
  r.x = x;
  r.y = y;
  r.score = score;
  return r;
}

}  // namespace

TEST(PortableRng, FixedStream) {
  PortableRng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.uniform(), b.uniform());
  std::mt19937_64 raw(42);
  PortableRng c(42);
  EXPECT_EQ(c.uniform(), static_cast<double>(raw() >> 11) * 0x1.0p-53);
}

TEST(PortableRng, PoissonAndNormalMoments) {
  PortableRng rng(1);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(sq / n, 1.0, 0.02);
  for (const double mean : {0.5, 5.0, 75.0}) {
    double total = 0.0;
    for (int i = 0; i < 20000; ++i) total += rng.poisson(mean);
    EXPECT_NEAR(total / 20000, mean, 4.0 * std::sqrt(mean / 20000));
  }
  EXPECT_EQ(rng.poisson(0.0), 0);
  EXPECT_THROW(rng.poisson(-1.0), std::invalid_argument);
}

TEST(Simulate, PerfectDetectionMatchesTruthCount) {
  ScenarioConfig scene;
  scene.random_objects = 7;
  scene.frames = 50;
  scene.p_d = 1.0;
  const Simulation sim = simulate(scene, 3);
  ASSERT_EQ(sim.truth.size(), 50u);
  for (std::size_t k = 0; k < 50; ++k) {
    EXPECT_EQ(sim.detections[k].detections.size(), sim.truth[k].size());
    EXPECT_EQ(sim.truth[k].size(), 7u);
    // No noise: detections sit exactly on the truth.
    for (std::size_t i = 0; i < sim.truth[k].size(); ++i) {
      EXPECT_EQ(sim.detections[k].detections[i].xy, Vector2(sim.truth[k][i].x, sim.truth[k][i].y));
    }
  }
}

TEST(Simulate, ClutterCountMatchesRate) {
  ScenarioConfig scene;
  scene.frames = 1000;
  scene.clutter_rate = 5.0;
  const Simulation sim = simulate(scene, 4);
  double total = 0.0;
  for (const auto& f : sim.detections) {
    total += static_cast<double>(f.detections.size());
    for (const auto& d : f.detections) {
      EXPECT_GE(d.score, 0.1);
      EXPECT_LT(d.score, 0.6);
      EXPECT_GE(d.xy.x(), -50.0);
      EXPECT_LT(d.xy.x(), 50.0);
    }
  }
  const double mean = total / 1000.0;
  EXPECT_NEAR(mean, 5.0, 3.0 * std::sqrt(5.0 / 1000.0));
}

TEST(Simulate, SameSeedSameOutput) {
  ScenarioConfig scene;
  scene.random_objects = 5;
  scene.frames = 30;
  scene.p_d = 0.8;
  scene.clutter_rate = 2;
  scene.r = Vector5(0.1, 0.1, 0.2, 0.2, 0.01).asDiagonal();
  const Simulation a = simulate(scene, 9), b = simulate(scene, 9), c = simulate(scene, 10);
  std::string sa, sb, sc;
  for (const auto& f : a.detections) for (const auto& d : f.detections) sa += detection_line(f.frame, f.t, d);
  for (const auto& f : b.detections) for (const auto& d : f.detections) sb += detection_line(f.frame, f.t, d);
  for (const auto& f : c.detections) for (const auto& d : f.detections) sc += detection_line(f.frame, f.t, d);
  EXPECT_EQ(sa, sb);
  EXPECT_NE(sa, sc);
}

TEST(Simulate, TruthFollowsCtra) {
  ScenarioConfig scene;
  scene.frames = 10;
  scene.dt = 0.1;
  ScriptedObject o;
  o.initial << 0, 0, 10, 0, 0.2, 0.5;
  o.birth = 2;
  o.death = 8;
  scene.objects.push_back(o);
  const Simulation sim = simulate(scene, 1);
  EXPECT_TRUE(sim.truth[1].empty());
  EXPECT_TRUE(sim.truth[8].empty());
  Vector6 s = o.initial;
  for (int k = 2; k < 8; ++k) {
    ASSERT_EQ(sim.truth[static_cast<std::size_t>(k)].size(), 1u);
    const TrackRecord& r = sim.truth[static_cast<std::size_t>(k)][0];
    EXPECT_EQ(r.x, s(0));
    EXPECT_EQ(r.track_id, (TrackId{2, 0}));
    EXPECT_EQ(r.score, 1.0);
    s = ctra_transition(s, 0.1);
  }
}

TEST(Simulate, ValidatesConfig) {
  ScenarioConfig bad;
  bad.p_d = 1.5;
  EXPECT_THROW(simulate(bad, 0), std::invalid_argument);
  bad = {};
  bad.clutter_rate = -1;
  EXPECT_THROW(simulate(bad, 0), std::invalid_argument);
  bad = {};
  bad.r(0, 0) = -1;
  EXPECT_THROW(simulate(bad, 0), std::invalid_argument);
  EXPECT_THROW(scenario_from_json(nlohmann::json::parse(R"({"nope": 1})")), std::invalid_argument);
}

TEST(Similarity, Examples) {
  EXPECT_EQ(similarity(0.0, 2.0), 1.0);
  EXPECT_EQ(similarity(2.0, 2.0), 0.0);
  EXPECT_EQ(similarity(1.0, 2.0), 0.5);
  EXPECT_EQ(similarity(5.0, 2.0), 0.0);
  EXPECT_THROW(similarity(1.0, 0.0), std::invalid_argument);
  for (double a = 0.0; a < 3.0; a += 0.1) {
    for (double b = 0.0; b < 3.0; b += 0.1) {
      EXPECT_LE(std::abs(similarity(a, 2.0) - similarity(b, 2.0)), std::abs(a - b) / 2.0 + 1e-15);
    }
  }
}

TEST(MatchFrame, Examples) {
  const std::vector<TrackRecord> gt{rec({0, 0}, 0, 0, 0), rec({0, 1}, 0, 10, 0)};
  const FrameMatch perfect = match_frame(gt, gt, 2.0);
  EXPECT_EQ(perfect.tp, 2u);
  EXPECT_EQ(perfect.fp, 0u);
  EXPECT_EQ(perfect.fn, 0u);

  const std::vector<TrackRecord> one_gt{rec({0, 0}, 0, 0, 0)};
  const std::vector<TrackRecord> far{rec({5, 5}, 0, 2.5, 0)};
  const FrameMatch miss = match_frame(far, one_gt, 2.0);
  EXPECT_EQ(miss.tp, 0u);
  EXPECT_EQ(miss.fp, 1u);
  EXPECT_EQ(miss.fn, 1u);

  const std::vector<TrackRecord> edge{rec({5, 5}, 0, 2.0, 0)};
  EXPECT_EQ(match_frame(edge, one_gt, 2.0).tp, 1u);
}

TEST(MatchFrame, CrossedPairsMinimizeTotalDistance) {
  // Track a is closest to gt 0, but the joint optimum pairs a with gt 1.
  const std::vector<TrackRecord> gt{rec({0, 0}, 0, 0, 0), rec({0, 1}, 0, 1.5, 0)};
  const std::vector<TrackRecord> tracks{rec({1, 0}, 0, 0.6, 0), rec({1, 1}, 0, -1.0, 0)};
  const FrameMatch m = match_frame(tracks, gt, 2.0);
  ASSERT_EQ(m.tp, 2u);
  EXPECT_EQ(m.pairs[0].track_id, (TrackId{1, 1}));
  EXPECT_EQ(m.pairs[1].track_id, (TrackId{1, 0}));
  EXPECT_NEAR(m.pairs[0].distance + m.pairs[1].distance, 1.9, 1e-12);
}

TEST(MatchFrame, MaximizesMatchesThenDistanceVsBruteForce) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<TrackRecord> gt, tracks;
    const int ng = 1 + static_cast<int>(u(rng) * 1.5), nt = static_cast<int>(u(rng) * 1.75);
    for (int i = 0; i < ng; ++i) gt.push_back(rec({0, i}, 0, u(rng), u(rng)));
    for (int j = 0; j < nt; ++j) tracks.push_back(rec({1, j}, 0, u(rng), u(rng)));
    const FrameMatch m = match_frame(tracks, gt, 2.0);

    // Enumerate every partial matching: gt i takes track perm[i] or nothing.
    std::size_t best_count = 0;
    double best_dist = kInf;
    std::vector<int> choice(static_cast<std::size_t>(ng), -1);
    std::vector<char> used(static_cast<std::size_t>(nt), 0);
    auto recurse = [&](auto&& self, int i, std::size_t count, double dist) -> void {
      if (i == ng) {
        if (count > best_count || (count == best_count && dist < best_dist - 1e-12)) {
          best_count = count;
          best_dist = dist;
        }
        return;
      }
      self(self, i + 1, count, dist);
      for (int j = 0; j < nt; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double d = std::hypot(gt[static_cast<std::size_t>(i)].x - tracks[static_cast<std::size_t>(j)].x,
                                    gt[static_cast<std::size_t>(i)].y - tracks[static_cast<std::size_t>(j)].y);
        if (d > 2.0) continue;
        used[static_cast<std::size_t>(j)] = 1;
        self(self, i + 1, count + 1, dist + d);
        used[static_cast<std::size_t>(j)] = 0;
      }
    };
    recurse(recurse, 0, 0, 0.0);
    if (best_count == 0) best_dist = 0.0;
    double dist = 0.0;
    for (const auto& p : m.pairs) dist += p.distance;
    EXPECT_EQ(m.tp, best_count);
    EXPECT_NEAR(dist, best_dist, 1e-9);
    EXPECT_EQ(m.tp + m.fn, gt.size());
  }
}

TEST(ClearMetrics, PerfectTracking) {
  std::vector<TrackRecord> gt;
  for (int k = 0; k < 10; ++k) {
    gt.push_back(rec({0, 0}, k, k, 0));
    gt.push_back(rec({0, 1}, k, k, 10));
  }
  const ClearMetrics m = evaluate(gt, gt);
  EXPECT_EQ(m.mota, 1.0);
  EXPECT_EQ(m.ids, 0u);
  EXPECT_EQ(m.motp, 0.0);
  EXPECT_EQ(m.mean_similarity, 1.0);
}

TEST(ClearMetrics, OneIdentitySwitch) {
  std::vector<TrackRecord> gt, tracks;
  for (int k = 0; k < 100; ++k) {
    gt.push_back(rec({0, 0}, k, k, 0));
    tracks.push_back(rec(k < 50 ? TrackId{0, 7} : TrackId{50, 8}, k, k, 0));
  }
  const ClearMetrics m = evaluate(tracks, gt);
  EXPECT_EQ(m.ids, 1u);
  EXPECT_NEAR(m.mota, 0.99, 1e-15);
}

TEST(ClearMetrics, NoTracks) {
  std::vector<TrackRecord> gt;
  for (int k = 0; k < 5; ++k) gt.push_back(rec({0, 0}, k, 0, 0));
  const ClearMetrics m = evaluate({}, gt);
  EXPECT_EQ(m.mota, 0.0);
  EXPECT_EQ(m.fn, 5u);
}

TEST(ClearMetrics, IdRelabelingInvariantAndBounded) {
  ScenarioConfig scene;
  scene.random_objects = 6;
  scene.frames = 40;
  scene.p_d = 0.9;
  scene.clutter_rate = 3;
  scene.r = Vector5(0.04, 0.04, 0.25, 0.25, 0.01).asDiagonal();
  const Simulation sim = simulate(scene, 12);
  std::vector<TrackRecord> truth, tracks;
  for (const auto& f : sim.truth) truth.insert(truth.end(), f.begin(), f.end());
  for (const auto& f : track_scene(car_config(), sim.detections)) tracks.insert(tracks.end(), f.begin(), f.end());
  const ClearMetrics m = evaluate(tracks, truth);
  std::vector<TrackRecord> relabeled = tracks;
  for (auto& r : relabeled) r.track_id = {1000 - r.track_id.measurement, r.track_id.frame};
  const ClearMetrics n = evaluate(relabeled, truth);
  EXPECT_EQ(m.mota, n.mota);
  EXPECT_EQ(m.ids, n.ids);
  EXPECT_LE(m.mota, 1.0);
  EXPECT_EQ(m.tp + m.fn, m.num_truth);
}

TEST(Amota, TrivialCases) {
  std::vector<TrackRecord> gt;
  for (int k = 0; k < 10; ++k) gt.push_back(rec({0, 0}, k, k, 0));
  EXPECT_EQ(amota(gt, gt), 1.0);
  EXPECT_EQ(amota({}, gt), 0.0);
}

// Four ground-truth boxes; two true tracks at score 0.9, one false track at
// 0.8 and two more true tracks at 0.5. Operating points:
//   thr 0.9: TP 2, FP 0, FN 2 -> recall 0.5
//   thr 0.8: TP 2, FP 1, FN 2 -> recall 0.5
//   thr 0.5: TP 4, FP 1, FN 0 -> recall 1.0
// Targets r <= 0.5 use thr 0.9: MOTAR = 1 - (2 - (1 - r) 4) / (4 r) = 1.
// Targets r > 0.5 use thr 0.5: MOTAR = 1 - (1 + 0 - (1 - r) 4) / (4 r).
TEST(Amota, TwoOperatingPoints) {
  std::vector<TrackRecord> gt, tracks;
  for (int i = 0; i < 4; ++i) gt.push_back(rec({0, i}, 0, 10.0 * i, 0));
  tracks.push_back(rec({1, 0}, 0, 0, 0, 0.9));
  tracks.push_back(rec({1, 1}, 0, 10, 0, 0.9));
  tracks.push_back(rec({1, 2}, 0, 100, 0, 0.8));
  tracks.push_back(rec({1, 3}, 0, 20, 0, 0.5));
  tracks.push_back(rec({1, 4}, 0, 30, 0, 0.5));
  double expect = 0.0;
  for (int i = 1; i <= 40; ++i) {
    const double r = i / 40.0;
    const double motar = r <= 0.5 ? 1.0 : 1.0 - (1.0 - (1.0 - r) * 4.0) / (4.0 * r);
    expect += std::clamp(motar, 0.0, 1.0);
  }
  expect /= 40.0;
  EXPECT_NEAR(amota(tracks, gt), expect, 1e-12);
}

TEST(ClosedLoop, SingleObjectIsPerfect) {
  ScenarioConfig scene;
  scene.frames = 60;
  ScriptedObject o;
  o.initial << -20, 5, 6, 0.3, 0.05, 0;
  scene.objects.push_back(o);
  const Simulation sim = simulate(scene, 0);
  std::vector<TrackRecord> truth, tracks;
  for (const auto& f : sim.truth) truth.insert(truth.end(), f.begin() , f.end());
  for (const auto& f : track_scene(car_config(), sim.detections)) tracks.insert(tracks.end(), f.begin(), f.end());
  std::erase_if(truth, [](const TrackRecord& r) { return r.frame == 0; });
  std::erase_if(tracks, [](const TrackRecord& r) { return r.frame == 0; });
  const ClearMetrics m = evaluate(tracks, truth);
  EXPECT_EQ(m.mota, 1.0);
  EXPECT_EQ(m.ids, 0u);
}
