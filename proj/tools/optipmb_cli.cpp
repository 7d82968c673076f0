#include "optipmb/optipmb.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <exception>
#include <iostream>
#include <thread>
#include <vector>

namespace {

using namespace optipmb;

/// Tracks each input file into its output file. Scenes are independent, so
/// workers just pull the next index.
int run_track(const std::string& config_path, const std::vector<std::string>& inputs,
              const std::vector<std::string>& outputs, unsigned threads) {
  if (inputs.size() != outputs.size()) throw std::invalid_argument("--in and --out need the same number of files");
  const RunConfig cfg = load_config(config_path);

  std::vector<RunSummary> summaries(inputs.size());
  std::vector<std::exception_ptr> errors(inputs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < inputs.size(); i = next++) {
      try {
        summaries[i] = run_tracker(cfg, inputs[i], outputs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(inputs.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  int status = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (errors[i]) {
      try {
        std::rethrow_exception(errors[i]);
      } catch (const std::exception& e) {
        std::cerr << "error: " << inputs[i] << ": " << e.what() << '\n';
      }
      status = 1;
      continue;
    }
    const RunSummary& s = summaries[i];
    std::printf("%s: %zu frames, %zu track records, %zu tracks, %.3f s\n", inputs[i].c_str(), s.frames,
                s.track_records, s.unique_tracks, s.wall_seconds);
  }
  return status;
}

int run_simulate(const std::string& scenario_path, std::uint64_t seed, const std::string& gt_path,
                 const std::string& det_path) {
  const Simulation sim = simulate(load_scenario(scenario_path), seed);
  write_tracks(gt_path, sim.truth);
  write_detections(det_path, sim.detections);
  std::size_t boxes = 0;
  std::size_t dets = 0;
  for (const auto& f : sim.truth) boxes += f.size();
  for (const auto& f : sim.detections) dets += f.detections.size();
  std::printf("%zu frames, %zu ground-truth boxes, %zu detections\n", sim.truth.size(), boxes, dets);
  return 0;
}

int run_evaluate(const std::string& gt_path, const std::string& tracks_path, double d0) {
  const auto truth = load_tracks(gt_path);
  const auto tracks = load_tracks(tracks_path);
  const ClearMetrics m = evaluate(tracks, truth, d0);
  std::printf("MOTA %.6f\nMOTP %.6f\nsimilarity %.6f\nAMOTA %.6f\nGT %zu\nTP %zu\nFP %zu\nFN %zu\nIDS %zu\n", m.mota,
              m.motp, m.mean_similarity, amota(tracks, truth, 40, d0), m.num_truth, m.tp, m.fp, m.fn, m.ids);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Poisson multi-Bernoulli 3D multi-object tracker"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  unsigned threads = 1;
  auto* track = app.add_subcommand("track", "Track detection files");
  track->add_option("--config", config_path, "Tracker configuration (JSON)")->required()->check(CLI::ExistingFile);
  track->add_option("--in", inputs, "Detection files (JSON lines)")->required()->check(CLI::ExistingFile);
  track->add_option("--out", outputs, "Track files to write, one per input")->required();
  track->add_option("--threads", threads, "Scenes processed concurrently")->check(CLI::PositiveNumber);

  std::string scenario_path;
  std::uint64_t seed = 0;
  std::string gt_out;
  std::string det_out;
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic scene");
  sim->add_option("--scenario", scenario_path, "Scenario description (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("--seed", seed, "Random seed")->required();
  sim->add_option("--out-gt", gt_out, "Ground-truth file to write")->required();
  sim->add_option("--out-det", det_out, "Detection file to write")->required();

  std::string gt_path;
  std::string tracks_path;
  double d0 = 2.0;
  auto* eval = app.add_subcommand("evaluate", "Score tracks against ground truth");
  eval->add_option("--gt", gt_path, "Ground-truth file")->required()->check(CLI::ExistingFile);
  eval->add_option("--tracks", tracks_path, "Track file")->required()->check(CLI::ExistingFile);
  eval->add_option("--d0", d0, "Matching distance (m)")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*track) return run_track(config_path, inputs, outputs, threads);
    if (*sim) return run_simulate(scenario_path, seed, gt_out, det_out);
    if (*eval) return run_evaluate(gt_path, tracks_path, d0);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
