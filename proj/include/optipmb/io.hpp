#pragma once

#include "optipmb/density.hpp"
#include "optipmb/filter.hpp"
#include "optipmb/params.hpp"
#include "optipmb/tracker.hpp"
#include "optipmb/tracks.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace optipmb {

/// Malformed input file; `line` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : std::runtime_error(path + (line ? ":" + std::to_string(line) : std::string()) + ": " + what), line_(line) {}
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Shortest text that reads back to the same double (17 significant digits).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline TrackId parse_track_id(const std::string& s) {
  const auto dash = s.find('-', 1);
  if (dash == std::string::npos) throw std::invalid_argument("track id '" + s + "' is not of the form k-m");
  std::size_t used_k = 0, used_m = 0;
  const int k = std::stoi(s.substr(0, dash), &used_k);
  const int m = std::stoi(s.substr(dash + 1), &used_m);
  if (used_k != dash || used_m != s.size() - dash - 1) throw std::invalid_argument("track id '" + s + "' is malformed");
  return {k, m};
}

namespace detail {

using nlohmann::json;

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

class LineReader {
 public:
  LineReader(const std::string& path, std::size_t line, const json& obj) : path_(path), line_(line), obj_(obj) {}

  [[nodiscard]] const json& field(const char* name) const {
    const auto it = obj_.find(name);
    if (it == obj_.end()) fail(std::string("missing required field '") + name + "'");
    return *it;
  }
  [[nodiscard]] double number(const char* name) const {
    const json& v = field(name);
    if (!v.is_number()) fail(std::string("field '") + name + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(std::string("field '") + name + "' must be finite");
    return d;
  }
  [[nodiscard]] int integer(const char* name) const {
    const json& v = field(name);
    if (!v.is_number_integer()) fail(std::string("field '") + name + "' must be an integer");
    return v.get<int>();
  }
  [[nodiscard]] std::string string(const char* name) const {
    const json& v = field(name);
    if (!v.is_string()) fail(std::string("field '") + name + "' must be a string");
    return v.get<std::string>();
  }
  [[nodiscard]] bool has(const char* name) const { return obj_.contains(name); }
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(path_, line_, what); }

 private:
  const std::string& path_;
  std::size_t line_;
  const json& obj_;
};

/// Calls fn(line_number, object) for every non-blank line.
template <typename Fn>
void for_each_json_line(const std::string& path, Fn&& fn) {
  std::ifstream in = open_in(path);
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path, no, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(path, no, "expected a JSON object");
    fn(no, obj);
  }
}

inline std::string quoted(const std::string& s) { return json(s).dump(); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Detections

/// One detection line: frame, t, class, x, y, z, vx, vy, yaw, l, w, h, score
/// and optional num_pts (-1 = absent).
inline std::string detection_line(int frame, double t, const Detection& d) {
  std::string s = "{\"frame\":" + std::to_string(frame) + ",\"t\":" + format_double(t) +
                  ",\"class\":" + detail::quoted(d.label) + ",\"x\":" + format_double(d.xy.x()) +
                  ",\"y\":" + format_double(d.xy.y()) + ",\"z\":" + format_double(d.aux.z) +
                  ",\"vx\":" + format_double(d.velocity.x()) + ",\"vy\":" + format_double(d.velocity.y()) +
                  ",\"yaw\":" + format_double(d.yaw) + ",\"l\":" + format_double(d.aux.length) +
                  ",\"w\":" + format_double(d.aux.width) + ",\"h\":" + format_double(d.aux.height) +
                  ",\"score\":" + format_double(d.score) +
                  ",\"num_pts\":" + std::to_string(d.lidar_pts.value_or(-1)) + "}";
  return s;
}

inline void write_detections(const std::string& path, std::span<const FrameBundle> frames) {
  std::ofstream out = detail::open_out(path);
  for (const FrameBundle& f : frames) {
    for (const Detection& d : f.detections) out << detection_line(f.frame, f.t, d) << '\n';
  }
}

/// Reads a detection file into frames sorted by index. Classes outside
/// `known_classes` are rejected unless the set is empty. Frames must share a
/// single timestamp and timestamps must increase with the frame index.
inline std::vector<FrameBundle> load_detections(const std::string& path, const std::set<ClassLabel>& known_classes) {
  std::map<int, FrameBundle> frames;
  std::map<int, std::size_t> first_line;
  detail::for_each_json_line(path, [&](std::size_t no, const nlohmann::json& obj) {
    const detail::LineReader r(path, no, obj);
    const int frame = r.integer("frame");
    const double t = r.number("t");
    Detection d;
    d.label = r.string("class");
    if (!known_classes.empty() && !known_classes.contains(d.label)) r.fail("unknown class '" + d.label + "'");
    d.xy = {r.number("x"), r.number("y")};
    d.aux.z = r.number("z");
    d.velocity = {r.number("vx"), r.number("vy")};
    d.yaw = r.number("yaw");
    d.aux.length = r.number("l");
    d.aux.width = r.number("w");
    d.aux.height = r.number("h");
    d.score = r.number("score");
    if (r.has("num_pts")) {
      const int pts = r.integer("num_pts");
      if (pts < -1) r.fail("field 'num_pts' must be >= -1");
      if (pts >= 0) d.lidar_pts = pts;
    }
    if (!(d.score > 0.0 && d.score <= 1.0)) r.fail("field 'score' must lie in (0, 1]");
    if (!(d.aux.length > 0.0 && d.aux.width > 0.0 && d.aux.height > 0.0)) r.fail("box extents must be positive");

    auto [it, inserted] = frames.try_emplace(frame, FrameBundle{frame, t, {}});
    if (inserted) {
      first_line[frame] = no;
    } else if (it->second.t != t) {
      r.fail("timestamp differs from line " + std::to_string(first_line[frame]) + " of frame " +
             std::to_string(frame));
    }
    it->second.detections.push_back(std::move(d));
  });

  std::vector<FrameBundle> out;
  out.reserve(frames.size());
  for (auto& [frame, bundle] : frames) {
    if (!out.empty() && !(bundle.t > out.back().t)) {
      throw ParseError(path, first_line[frame],
                       "timestamps must increase strictly with frame index (frame " + std::to_string(frame) + ")");
    }
    out.push_back(std::move(bundle));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tracks

/// One track line: frame, t, track_id, class, x, y, z, vx, vy, yaw, l, w, h, score.
inline std::string track_line(const TrackRecord& r) {
  return "{\"frame\":" + std::to_string(r.frame) + ",\"t\":" + format_double(r.t) +
         ",\"track_id\":" + detail::quoted(r.track_id.str()) + ",\"class\":" + detail::quoted(r.label) +
         ",\"x\":" + format_double(r.x) + ",\"y\":" + format_double(r.y) + ",\"z\":" + format_double(r.aux.z) +
         ",\"vx\":" + format_double(r.velocity.x()) + ",\"vy\":" + format_double(r.velocity.y()) +
         ",\"yaw\":" + format_double(r.yaw) + ",\"l\":" + format_double(r.aux.length) +
         ",\"w\":" + format_double(r.aux.width) + ",\"h\":" + format_double(r.aux.height) +
         ",\"score\":" + format_double(r.score) + "}";
}

inline void write_tracks(const std::string& path, std::span<const std::vector<TrackRecord>> frames) {
  std::ofstream out = detail::open_out(path);
  for (const auto& frame : frames) {
    for (const TrackRecord& r : frame) out << track_line(r) << '\n';
  }
}

inline std::vector<TrackRecord> load_tracks(const std::string& path) {
  std::vector<TrackRecord> out;
  detail::for_each_json_line(path, [&](std::size_t no, const nlohmann::json& obj) {
    const detail::LineReader r(path, no, obj);
    TrackRecord t;
    t.frame = r.integer("frame");
    t.t = r.number("t");
    try {
      t.track_id = parse_track_id(r.string("track_id"));
    } catch (const std::invalid_argument& e) {
      r.fail(e.what());
    } catch (const std::out_of_range& e) {
      r.fail(std::string("track id out of range: ") + e.what());
    }
    t.label = r.string("class");
    t.x = r.number("x");
    t.y = r.number("y");
    t.aux.z = r.number("z");
    t.velocity = {r.number("vx"), r.number("vy")};
    t.yaw = r.number("yaw");
    t.aux.length = r.number("l");
    t.aux.width = r.number("w");
    t.aux.height = r.number("h");
    t.score = r.number("score");
    out.push_back(std::move(t));
  });
  return out;
}

/// Groups flat records by frame index (ascending).
inline std::map<int, std::vector<TrackRecord>> group_by_frame(std::span<const TrackRecord> records) {
  std::map<int, std::vector<TrackRecord>> out;
  for (const auto& r : records) out[r.frame].push_back(r);
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

namespace detail {

/// Diagonal matrices are written as their diagonal.
template <int N>
json matrix_to_json(const Mat<N>& m) {
  if (m.isDiagonal(0.0)) {
    json diag = json::array();
    for (int i = 0; i < N; ++i) diag.push_back(m(i, i));
    return diag;
  }
  json rows = json::array();
  for (int i = 0; i < N; ++i) {
    json row = json::array();
    for (int j = 0; j < N; ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Accepts an N-element diagonal or an N x N nested array.
template <int N>
Mat<N> matrix_from_json(const json& v, const std::string& what) {
  if (!v.is_array() || v.size() != static_cast<std::size_t>(N)) {
    throw std::invalid_argument(what + ": expected " + std::to_string(N) + " entries");
  }
  Mat<N> m = Mat<N>::Zero();
  if (v[0].is_number()) {
    for (int i = 0; i < N; ++i) m(i, i) = v[static_cast<std::size_t>(i)].get<double>();
    return m;
  }
  for (int i = 0; i < N; ++i) {
    const json& row = v[static_cast<std::size_t>(i)];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(N)) {
      throw std::invalid_argument(what + ": row " + std::to_string(i) + " must have " + std::to_string(N) + " entries");
    }
    for (int j = 0; j < N; ++j) m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return m;
}

inline const std::set<std::string>& reserved_config_keys() {
  static const std::set<std::string> keys{"region", "ut", "seed", "dt_fallback", "existence_floor", "max_miss_delete"};
  return keys;
}

}  // namespace detail

inline nlohmann::json class_params_to_json(const ClassParams& p) {
  return {{"eta_sf", p.eta_sf},     {"eta_iou", p.eta_iou},   {"p_s", p.p_s},
          {"eta_dist", p.eta_dist}, {"p_d0", p.p_d0},         {"pts_0", p.pts_0},
          {"s_d", p.s_d},           {"eta_score", p.eta_score}, {"mu_ab", p.mu_ab},
          {"mu_b0", p.mu_b0},       {"mu_c", p.mu_c},         {"eta_step", p.eta_step},
          {"eta_ext1", p.eta_ext1}, {"eta_ext2", p.eta_ext2}, {"eta_cnt", p.eta_cnt},
          {"P0", detail::matrix_to_json<6>(p.newborn_cov)},
          {"Q", detail::matrix_to_json<6>(p.noise.q)},
          {"R", detail::matrix_to_json<5>(p.noise.r)}};
}

/// Missing fields keep the values of `base`; unknown fields are rejected.
inline ClassParams class_params_from_json(const nlohmann::json& j, const std::string& label, ClassParams base = {}) {
  if (!j.is_object()) throw std::invalid_argument("class '" + label + "' must be an object");
  ClassParams p = std::move(base);
  for (const auto& [key, v] : j.items()) {
    const std::string where = "class '" + label + "' field '" + key + "'";
    auto num = [&] {
      if (!v.is_number()) throw std::invalid_argument(where + " must be a number");
      return v.get<double>();
    };
    auto integer = [&] {
      if (!v.is_number_integer()) throw std::invalid_argument(where + " must be an integer");
      return v.get<int>();
    };
    if (key == "eta_sf") p.eta_sf = num();
    else if (key == "eta_iou") p.eta_iou = num();
    else if (key == "p_s") p.p_s = num();
    else if (key == "eta_dist") p.eta_dist = num();
    else if (key == "p_d0") p.p_d0 = num();
    else if (key == "pts_0") p.pts_0 = num();
    else if (key == "s_d") p.s_d = num();
    else if (key == "eta_score") p.eta_score = num();
    else if (key == "mu_ab") p.mu_ab = num();
    else if (key == "mu_b0") p.mu_b0 = num();
    else if (key == "mu_c") p.mu_c = num();
    else if (key == "eta_step") p.eta_step = integer();
    else if (key == "eta_ext1") p.eta_ext1 = num();
    else if (key == "eta_ext2") p.eta_ext2 = num();
    else if (key == "eta_cnt") p.eta_cnt = integer();
    else if (key == "P0") p.newborn_cov = detail::matrix_from_json<6>(v, where);
    else if (key == "Q") p.noise.q = detail::matrix_from_json<6>(v, where);
    else if (key == "R") p.noise.r = detail::matrix_from_json<5>(v, where);
    else throw std::invalid_argument("unknown " + where);
  }
  return p;
}

inline nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["region"] = {{"x_min", cfg.region.x_min}, {"x_max", cfg.region.x_max},
                 {"y_min", cfg.region.y_min}, {"y_max", cfg.region.y_max}};
  j["ut"] = {{"alpha", cfg.ut.alpha}, {"beta", cfg.ut.beta}};
  j["ut"]["kappa"] = cfg.ut.kappa ? nlohmann::json(*cfg.ut.kappa) : nlohmann::json(nullptr);
  j["seed"] = cfg.seed;
  j["dt_fallback"] = cfg.dt_fallback;
  j["existence_floor"] = cfg.existence_floor;
  j["max_miss_delete"] = cfg.max_miss_delete;
  for (const auto& [label, p] : cfg.classes) j[label] = class_params_to_json(p);
  return j;
}

/// Top-level keys are class names plus the reserved run settings. Classes
/// named like a nuScenes category start from its tuned values.
inline RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  RunConfig cfg;
  const auto defaults = presets::nuscenes();
  for (const auto& [key, v] : j.items()) {
    if (key == "region") {
      cfg.region.x_min = v.value("x_min", cfg.region.x_min);
      cfg.region.x_max = v.value("x_max", cfg.region.x_max);
      cfg.region.y_min = v.value("y_min", cfg.region.y_min);
      cfg.region.y_max = v.value("y_max", cfg.region.y_max);
    } else if (key == "ut") {
      cfg.ut.alpha = v.value("alpha", cfg.ut.alpha);
      cfg.ut.beta = v.value("beta", cfg.ut.beta);
      if (v.contains("kappa") && !v["kappa"].is_null()) cfg.ut.kappa = v["kappa"].get<double>();
    } else if (key == "seed") {
      cfg.seed = v.get<std::uint64_t>();
    } else if (key == "dt_fallback") {
      cfg.dt_fallback = v.get<double>();
    } else if (key == "existence_floor") {
      cfg.existence_floor = v.get<double>();
    } else if (key == "max_miss_delete") {
      cfg.max_miss_delete = v.get<int>();
    } else {
      const auto it = defaults.find(key);
      cfg.classes[key] = class_params_from_json(v, key, it != defaults.end() ? it->second : ClassParams{});
    }
  }
  cfg.validate();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in = detail::open_in(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path, 0, std::string("invalid JSON: ") + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const std::exception& e) {
    throw ParseError(path, 0, e.what());
  }
}

inline std::set<ClassLabel> class_labels(const RunConfig& cfg) {
  std::set<ClassLabel> out;
  for (const auto& [label, p] : cfg.classes) out.insert(label);
  return out;
}

// ---------------------------------------------------------------------------
// Posterior snapshots

namespace detail {

inline json vec_to_json(const Vector6& v) { return json(std::vector<double>(v.data(), v.data() + 6)); }
inline json cov_to_json(const Matrix6& m) { return json(std::vector<double>(m.data(), m.data() + 36)); }

inline Vector6 vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 6) throw std::invalid_argument("mean must have 6 entries");
  return Eigen::Map<const Vector6>(v.data());
}

inline Matrix6 cov_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 36) throw std::invalid_argument("cov must have 36 entries");
  return Eigen::Map<const Matrix6>(v.data());
}

}  // namespace detail

/// Lossless JSON snapshot; doubles use round-trip formatting.
inline nlohmann::json posterior_to_json(const PmbPosterior& pmb) {
  nlohmann::json j;
  j["poisson"] = nlohmann::json::array();
  for (const auto& c : pmb.poisson) {
    j["poisson"].push_back({{"weight", c.weight},
                            {"mean", detail::vec_to_json(c.density.mean)},
                            {"cov", detail::cov_to_json(c.density.cov)},
                            {"class", c.label},
                            {"age", c.age},
                            {"marked", c.marked}});
  }
  j["bernoulli"] = nlohmann::json::array();
  for (const auto& b : pmb.bernoulli) {
    j["bernoulli"].push_back({{"existence", b.existence},
                              {"mean", detail::vec_to_json(b.density.mean)},
                              {"cov", detail::cov_to_json(b.density.cov)},
                              {"aux", {b.aux.length, b.aux.width, b.aux.height, b.aux.z}},
                              {"class", b.fixed.label},
                              {"track_id", b.fixed.track_id.str()},
                              {"miss_count", b.miss_count},
                              {"track_len", b.track_len},
                              {"score", b.score}});
  }
  j["extracted_ids"] = nlohmann::json::array();
  for (const auto& id : pmb.extracted_ids) j["extracted_ids"].push_back(id.str());
  return j;
}

inline PmbPosterior posterior_from_json(const nlohmann::json& j) {
  PmbPosterior pmb;
  for (const auto& c : j.at("poisson")) {
    PoissonComponent p;
    p.weight = c.at("weight").get<double>();
    p.density = {detail::vec_from_json(c.at("mean")), detail::cov_from_json(c.at("cov"))};
    p.label = c.at("class").get<std::string>();
    p.age = c.at("age").get<int>();
    p.marked = c.at("marked").get<bool>();
    pmb.poisson.push_back(std::move(p));
  }
  for (const auto& c : j.at("bernoulli")) {
    BernoulliComponent b;
    b.existence = c.at("existence").get<double>();
    b.density = {detail::vec_from_json(c.at("mean")), detail::cov_from_json(c.at("cov"))};
    const auto aux = c.at("aux").get<std::vector<double>>();
    if (aux.size() != 4) throw std::invalid_argument("aux must have 4 entries");
    b.aux = {aux[0], aux[1], aux[2], aux[3]};
    b.fixed = {c.at("class").get<std::string>(), parse_track_id(c.at("track_id").get<std::string>())};
    b.miss_count = c.at("miss_count").get<int>();
    b.track_len = c.at("track_len").get<int>();
    b.score = c.at("score").get<double>();
    pmb.bernoulli.push_back(std::move(b));
  }
  for (const auto& id : j.at("extracted_ids")) pmb.extracted_ids.insert(parse_track_id(id.get<std::string>()));
  return pmb;
}

// ---------------------------------------------------------------------------
// End-to-end run

struct RunSummary {
  std::size_t frames = 0;
  std::size_t track_records = 0;
  std::size_t unique_tracks = 0;
  double wall_seconds = 0.0;
};

/// Tracks one detection file and writes the track file.
inline RunSummary run_tracker(const RunConfig& cfg, const std::string& detections_path, const std::string& output_path) {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<FrameBundle> frames = fill_frame_gaps(load_detections(detections_path, class_labels(cfg)));
  Tracker tracker(cfg);
  std::vector<std::vector<TrackRecord>> tracks;
  tracks.reserve(frames.size());
  std::set<TrackId> ids;
  RunSummary s;
  for (const FrameBundle& f : frames) {
    tracks.push_back(tracker.step(f));
    s.track_records += tracks.back().size();
    for (const auto& r : tracks.back()) ids.insert(r.track_id);
  }
  write_tracks(output_path, tracks);
  s.frames = frames.size();
  s.unique_tracks = ids.size();
  s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return s;
}

}  // namespace optipmb
