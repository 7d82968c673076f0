#include "support.hpp"

#include <gtest/gtest.h>

#include <map>

using namespace optipmb;
using namespace optipmb::testing;

TEST(Tracker, SingleHighScoreDetectionStartsTrack) {
  Tracker tracker(car_config());
  const auto tracks = tracker.step(FrameBundle{0, 0.0, {car_detection(3, 4, 0.9)}});
  // HABM newborn with r = 1 >= eta_ext1 = 0.7.
  ASSERT_EQ(tracks.size(), 1u);
  EXPECT_EQ(tracks[0].track_id, (TrackId{0, 0}));
  EXPECT_EQ(tracks[0].x, 3.0);
  EXPECT_EQ(tracks[0].y, 4.0);
  EXPECT_NEAR(tracks[0].score, 0.9 * (1 - std::exp(-1.0)), 1e-15);
  ASSERT_EQ(tracker.posterior().bernoulli.size(), 1u);
  EXPECT_EQ(tracker.posterior().bernoulli[0].existence, 1.0);
}

TEST(Tracker, SingleLowScoreDetectionBecomesPoissonBirth) {
  Tracker tracker(car_config());
  EXPECT_TRUE(tracker.step(FrameBundle{0, 0.0, {car_detection(3, 4, 0.2)}}).empty());
  EXPECT_TRUE(tracker.posterior().bernoulli.empty());
  ASSERT_EQ(tracker.posterior().poisson.size(), 1u);
  EXPECT_EQ(tracker.posterior().poisson[0].weight, 2.0);

  // A second detection nearby is a first-time detection of that component.
  const auto tracks = tracker.step(FrameBundle{1, 0.5, {car_detection(3.5, 4, 0.2)}});
  ASSERT_EQ(tracker.posterior().bernoulli.size(), 1u);
  const double r = tracker.posterior().bernoulli[0].existence;
  EXPECT_GT(r, 0.99);
  EXPECT_EQ(tracks.size(), r >= 0.7 ? 1u : 0u);
  EXPECT_TRUE(tracker.posterior().poisson.empty());  // the used component is marked and pruned
}

TEST(Tracker, FilteredDetectionsAreIgnored) {
  Tracker tracker(car_config());
  EXPECT_TRUE(tracker.step(FrameBundle{0, 0.0, {car_detection(0, 0, 0.05)}}).empty());
  EXPECT_TRUE(tracker.posterior().poisson.empty());
}

TEST(Tracker, RejectsNonIncreasingTime) {
  Tracker tracker(car_config());
  tracker.step(FrameBundle{0, 1.0, {}});
  EXPECT_THROW(tracker.step(FrameBundle{1, 1.0, {}}), std::invalid_argument);
}

TEST(Tracker, UnknownClassThrows) {
  Tracker tracker(car_config());
  Detection d = car_detection(0, 0);
  d.label = "boat";
  EXPECT_THROW(tracker.step(FrameBundle{0, 0.0, {d}}), std::out_of_range);
}

TEST(Tracker, FollowsObjectAndFadesAfterLoss) {
  Tracker tracker(car_config());
  for (int k = 0; k < 10; ++k) {
    const auto tracks = tracker.step(FrameBundle{k, 0.5 * k, {car_detection(5.0 * 0.5 * k, 0, 0.9, Vector2(5, 0))}});
    ASSERT_EQ(tracks.size(), 1u) << "frame " << k;
    EXPECT_EQ(tracks[0].track_id, (TrackId{0, 0}));
  }
  EXPECT_NEAR(tracker.posterior().bernoulli[0].density.mean(idx::kV), 5.0, 0.2);
  // One miss keeps the track (miss_count 1 < eta_cnt 2), the second hides it.
  EXPECT_EQ(tracker.step(FrameBundle{10, 5.0, {}}).size(), 1u);
  EXPECT_TRUE(tracker.step(FrameBundle{11, 5.5, {}}).empty());
  for (int k = 12; k < 30 && !tracker.posterior().bernoulli.empty(); ++k) tracker.step(FrameBundle{k, 0.5 * k, {}});
  EXPECT_TRUE(tracker.posterior().bernoulli.empty());
}

TEST(Tracker, MaxMissDeleteRemovesZombies) {
  RunConfig cfg;
  cfg.classes["car"] = presets::kitti_car();
  cfg.dt_fallback = 0.1;
  cfg.max_miss_delete = 3;
  Tracker tracker(cfg);
  tracker.step(FrameBundle{0, 0.0, {car_detection(0, 0, 0.9)}});
  ASSERT_EQ(tracker.posterior().bernoulli.size(), 1u);
  tracker.step(FrameBundle{1, 0.1, {}});
  tracker.step(FrameBundle{2, 0.2, {}});
  EXPECT_EQ(tracker.posterior().bernoulli.size(), 1u);
  tracker.step(FrameBundle{3, 0.3, {}});
  EXPECT_TRUE(tracker.posterior().bernoulli.empty());
}

TEST(Tracker, RestoreContinuesIdentically) {
  ScenarioConfig scene;
  scene.random_objects = 5;
  scene.frames = 40;
  scene.p_d = 0.9;
  scene.clutter_rate = 3;
  scene.r = Vector5(0.04, 0.04, 0.25, 0.25, 0.01).asDiagonal();
  const auto frames = simulate(scene, 8).detections;
  const RunConfig cfg = car_config();

  Tracker full(cfg);
  std::vector<std::vector<TrackRecord>> expect;
  for (const auto& f : frames) expect.push_back(full.step(f));

  Tracker first(cfg);
  for (std::size_t k = 0; k < 20; ++k) first.step(frames[k]);
  const auto saved = nlohmann::json::parse(posterior_to_json(first.posterior()).dump());
  Tracker second(cfg);
  second.restore(posterior_from_json(saved), first.last_time());
  for (std::size_t k = 20; k < frames.size(); ++k) {
    const auto got = second.step(frames[k]);
    ASSERT_EQ(got.size(), expect[k].size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(track_line(got[i]), track_line(expect[k][i]));
  }
}

TEST(Tracker, NoFlickerWithPerfectDetections) {
  ScenarioConfig scene;
  scene.random_objects = 6;
  scene.frames = 80;
  scene.p_d = 1.0;
  const RunConfig cfg = car_config();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Simulation sim = simulate(scene, seed);
    Tracker tracker(cfg);
    std::map<TrackId, int> last_seen;
    for (const auto& f : sim.detections) {
      for (const auto& r : tracker.step(f)) {
        const auto it = last_seen.find(r.track_id);
        if (it != last_seen.end()) EXPECT_EQ(it->second, f.frame - 1) << "track " << r.track_id.str() << " flickered";
        last_seen[r.track_id] = f.frame;
      }
    }
    for (const auto& [id, last] : last_seen) EXPECT_EQ(last, scene.frames - 1) << "track " << id.str() << " lost";
  }
}

TEST(Tracker, NoSpontaneousDuplication) {
  ScenarioConfig scene;
  scene.random_objects = 8;
  scene.frames = 60;
  scene.p_d = 0.85;
  scene.clutter_rate = 6;
  scene.r = Vector5(0.09, 0.09, 0.5, 0.5, 0.02).asDiagonal();
  const RunConfig cfg = car_config();
  const Simulation sim = simulate(scene, 21);
  Tracker tracker(cfg);
  std::size_t carried = 0;
  for (const auto& f : sim.detections) {
    const auto tracks = tracker.step(f);
    EXPECT_LE(tracks.size(), tracker.last_step().measurements + carried);
    std::set<TrackId> ids;
    for (const auto& r : tracks) ids.insert(r.track_id);
    EXPECT_EQ(ids.size(), tracks.size());
    carried = tracks.size();
  }
}

TEST(Tracker, ClassesDoNotInteract) {
  RunConfig cfg = car_config();
  cfg.classes["pedestrian"] = presets::nuscenes().at("pedestrian");
  Tracker tracker(cfg);
  Detection ped = car_detection(0.2, 0, 0.9);
  ped.label = "pedestrian";
  const auto tracks = tracker.step(FrameBundle{0, 0.0, {car_detection(0, 0, 0.9), ped}});
  ASSERT_EQ(tracks.size(), 2u);
  EXPECT_EQ(tracks[0].label, "car");
  EXPECT_EQ(tracks[1].label, "pedestrian");
}

TEST(FrameGaps, FilledWithEmptyFrames) {
  const std::vector<FrameBundle> in{{0, 0.0, {car_detection(0, 0)}}, {3, 1.5, {}}};
  const auto out = fill_frame_gaps(in);
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(out[1].frame, 1);
  EXPECT_DOUBLE_EQ(out[1].t, 0.5);
  EXPECT_DOUBLE_EQ(out[2].t, 1.0);
  EXPECT_TRUE(out[2].detections.empty());
}

TEST(AdaptiveDetection, PointCounterLowersMissPenalty) {
  RunConfig cfg = car_config();
  const auto occluded = [](const ClassLabel&, const Vector6&, const AuxState&) { return std::optional<int>(0); };
  Tracker plain(cfg);
  Tracker hooked(cfg, occluded);
  for (Tracker* t : {&plain, &hooked}) {
    t->step(FrameBundle{0, 0.0, {car_detection(0, 0, 0.9)}});
    t->step(FrameBundle{1, 0.5, {}});
  }
  // Lower p_d for an occluded object means a miss costs less existence.
  EXPECT_GT(hooked.posterior().bernoulli[0].existence, plain.posterior().bernoulli[0].existence);
}
