// Simulates a small scene, tracks it and prints CLEAR-MOT scores.
#include "optipmb/optipmb.hpp"

#include <cstdio>

int main() {
  using namespace optipmb;

  ScenarioConfig scene;
  scene.random_objects = 5;
  scene.frames = 60;
  scene.p_d = 0.9;
  scene.clutter_rate = 3.0;
  scene.r = Vector5(0.04, 0.04, 0.25, 0.25, 0.01).asDiagonal();

  RunConfig cfg;
  cfg.classes["car"] = presets::nuscenes_car();

  const Simulation sim = simulate(scene, 7);
  Tracker tracker(cfg);
  std::vector<TrackRecord> tracks;
  std::vector<TrackRecord> truth;
  for (std::size_t k = 0; k < sim.detections.size(); ++k) {
    for (auto& r : tracker.step(sim.detections[k])) tracks.push_back(std::move(r));
    truth.insert(truth.end(), sim.truth[k].begin(), sim.truth[k].end());
  }

  const ClearMetrics m = evaluate(tracks, truth);
  std::printf("MOTA %.3f  MOTP %.3f m  TP %zu  FP %zu  FN %zu  IDS %zu\n", m.mota, m.motp, m.tp, m.fp, m.fn, m.ids);
  return 0;
}
