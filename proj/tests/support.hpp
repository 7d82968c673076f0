#pragma once

#include "optipmb/optipmb.hpp"

#include <random>

namespace optipmb::testing {

inline Matrix6 random_spd6(std::mt19937_64& rng, double floor = 0.1) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix6 a;
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) a(i, j) = n(rng);
  }
  return a * a.transpose() + floor * Matrix6::Identity();
}

inline Detection car_detection(double x, double y, double score = 0.9, Vector2 vel = Vector2(1.0, 0.0)) {
  Detection d;
  d.xy = {x, y};
  d.velocity = vel;
  d.yaw = std::atan2(vel.y(), vel.x());
  d.aux = {4.5, 2.0, 1.7, 0.0};
  d.label = "car";
  d.score = score;
  return d;
}

inline RunConfig car_config() {
  RunConfig cfg;
  cfg.classes["car"] = presets::nuscenes_car();
  return cfg;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

template <typename A, typename B>
double max_rel_err(const A& a, const B& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace optipmb::testing

#include <filesystem>
#include <fstream>
#include <sstream>

namespace optipmb::testing {

/// Fresh scratch directory per test name, under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("optipmb_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace optipmb::testing
