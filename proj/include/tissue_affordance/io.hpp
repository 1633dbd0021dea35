#pragma once

// CSV and key = value config reading/writing. Every double is written with 17
// significant digits so a write/read cycle reproduces it exactly.

#include "tissue_affordance/kinematics.hpp"
#include "tissue_affordance/synthetic.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace taff {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view line, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

}  // namespace detail

inline double parse_double(std::string_view s, const std::string& what) {
  double v = 0.0;
  const std::string t = detail::trim(s);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v))
    throw InputError("invalid number for " + what + ": '" + t + "'");
  return v;
}

template <typename Int>
Int parse_int(std::string_view s, const std::string& what) {
  Int v = 0;
  const std::string t = detail::trim(s);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw InputError("invalid integer for " + what + ": '" + t + "'");
  return v;
}

inline bool parse_bool(std::string_view s, const std::string& what) {
  const std::string t = detail::trim(s);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw InputError("invalid boolean for " + what + ": '" + t + "'");
}

/// Rows of a CSV with the exact `header`; blank lines are skipped.
struct CsvTable {
  std::string source;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (line number, fields)
};

inline CsvTable read_csv(std::istream& in, const std::vector<std::string>& header,
                         const std::string& source) {
  CsvTable t{source, {}};
  std::string line;
  std::size_t n = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++n;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split(line);
    if (!have_header) {
      if (fields != header) {
        std::string want;
        for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
        throw InputError(detail::where(source, n) + "expected header '" + want + "'");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != header.size())
      throw InputError(detail::where(source, n) + "expected " + std::to_string(header.size()) +
                       " fields, got " + std::to_string(fields.size()));
    t.rows.emplace_back(n, std::move(fields));
  }
  if (!have_header) throw InputError(source + ": missing header");
  return t;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open " + path);
  return f;
}

// ---------------------------------------------------------------------------
// Tracks
// ---------------------------------------------------------------------------

inline const std::vector<std::string> kTracksHeader = {"frame", "point_id", "x", "y", "z", "label"};

inline TrackedScene read_tracks(std::istream& in, const std::string& source = "tracks",
                                double fps = 30.0) {
  const auto t = read_csv(in, kTracksHeader, source);
  std::vector<TrackRecord> recs;
  recs.reserve(t.rows.size());
  for (const auto& [line, f] : t.rows) {
    try {
      TrackRecord r;
      r.frame = parse_int<int>(f[0], "frame");
      r.point_id = parse_int<PointId>(f[1], "point_id");
      r.position = Vec3(parse_double(f[2], "x"), parse_double(f[3], "y"), parse_double(f[4], "z"));
      if (!f[5].empty()) r.label = parse_int<int>(f[5], "label");
      recs.push_back(r);
    } catch (const InputError& e) {
      throw InputError(detail::where(source, line) + e.what());
    }
  }
  if (recs.empty()) throw InputError(source + ": no track rows");
  return TrackedScene::from_records(recs, -1, fps);
}

inline TrackedScene read_tracks_file(const std::string& path) {
  auto f = open_input(path);
  return read_tracks(f, path);
}

inline void write_tracks(std::ostream& out, const TrackedScene& s) {
  out << "frame,point_id,x,y,z,label\n";
  for (int t = 0; t < s.frame_count(); ++t) {
    for (std::size_t i = 0; i < s.point_count(); ++i) {
      if (!s.present(t, i)) continue;
      const Vec3& p = s.position(t, i);
      const auto l = s.label(t, i);
      out << t << ',' << s.id(i) << ',' << fmt(p.x()) << ',' << fmt(p.y()) << ',' << fmt(p.z()) << ','
          << (l ? std::to_string(*l) : std::string()) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Poses
// ---------------------------------------------------------------------------

inline constexpr double kQuaternionTolerance = 1e-6;

inline RigidPose pose_from_quaternion(const Vec3& t, double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (std::abs(n - 1.0) > kQuaternionTolerance)
    throw InputError("quaternion norm " + fmt(n) + " is not unit within 1e-6");
  const Eigen::Quaterniond q(w / n, x / n, y / n, z / n);
  return RigidPose::make(q.toRotationMatrix(), t);
}

inline std::vector<std::optional<RigidPose>> read_poses(std::istream& in, const std::string& source = "poses") {
  const auto t = read_csv(in, {"frame", "tx", "ty", "tz", "qw", "qx", "qy", "qz"}, source);
  std::map<int, RigidPose> by_frame;
  for (const auto& [line, f] : t.rows) {
    try {
      const int frame = parse_int<int>(f[0], "frame");
      if (frame < 0) throw InputError("negative frame index");
      double v[7];
      for (int k = 0; k < 7; ++k) v[k] = parse_double(f[static_cast<std::size_t>(k + 1)], "pose field");
      if (!by_frame.emplace(frame, pose_from_quaternion(Vec3(v[0], v[1], v[2]), v[3], v[4], v[5], v[6])).second)
        throw InputError("duplicate pose for frame " + std::to_string(frame));
    } catch (const InputError& e) {
      throw InputError(detail::where(source, line) + e.what());
    }
  }
  if (by_frame.empty()) throw InputError(source + ": no pose rows");
  std::vector<std::optional<RigidPose>> out(static_cast<std::size_t>(by_frame.rbegin()->first + 1));
  for (const auto& [frame, pose] : by_frame) out[static_cast<std::size_t>(frame)] = pose;
  return out;
}

inline void write_poses(std::ostream& out, const std::vector<std::optional<RigidPose>>& poses) {
  out << "frame,tx,ty,tz,qw,qx,qy,qz\n";
  for (std::size_t t = 0; t < poses.size(); ++t) {
    if (!poses[t]) continue;
    Eigen::Quaterniond q(poses[t]->rotation);
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    const Vec3& o = poses[t]->origin;
    out << t << ',' << fmt(o.x()) << ',' << fmt(o.y()) << ',' << fmt(o.z()) << ',' << fmt(q.w()) << ','
        << fmt(q.x()) << ',' << fmt(q.y()) << ',' << fmt(q.z()) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Keypoints
// ---------------------------------------------------------------------------

inline ToolKeypoints read_keypoints(std::istream& in, const std::string& source = "keypoints") {
  const auto t = read_csv(in, {"frame", "kp_id", "x", "y", "z"}, source);
  std::map<int, std::map<int, Vec3>> by_frame;
  for (const auto& [line, f] : t.rows) {
    try {
      const int frame = parse_int<int>(f[0], "frame");
      const int kp = parse_int<int>(f[1], "kp_id");
      if (frame < 0) throw InputError("negative frame index");
      const Vec3 p(parse_double(f[2], "x"), parse_double(f[3], "y"), parse_double(f[4], "z"));
      if (!by_frame[frame].emplace(kp, p).second)
        throw InputError("duplicate keypoint " + std::to_string(kp) + " at frame " + std::to_string(frame));
    } catch (const InputError& e) {
      throw InputError(detail::where(source, line) + e.what());
    }
  }
  if (by_frame.empty()) throw InputError(source + ": no keypoint rows");
  ToolKeypoints k;
  k.frames.resize(static_cast<std::size_t>(by_frame.rbegin()->first + 1));
  for (const auto& [frame, kps] : by_frame)
    for (const auto& [id, p] : kps) k.frames[static_cast<std::size_t>(frame)].push_back(p);
  return k;
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

struct SynthSettings {
  std::string scene = "sheet";  // sheet | tool
  SheetParams sheet;
  ToolSceneParams tool;
};

/// Everything a config file can set. r_cluster and sigma default to the
/// scene-derived values until set explicitly.
struct Settings {
  RunConfig run = [] {
    RunConfig c;
    c.auto_radius = true;
    c.auto_sigma = true;
    return c;
  }();
  SynthSettings synth;
};

namespace detail {

inline Vec3 parse_vec3(std::string_view s, const std::string& what) {
  const auto parts = split(s);
  if (parts.size() != 3) throw InputError(what + " needs three comma-separated numbers");
  return Vec3(parse_double(parts[0], what), parse_double(parts[1], what), parse_double(parts[2], what));
}

inline void apply_sheet(SheetParams& p, const std::string& key, const std::string& v) {
  if (key == "n") p.n = parse_int<int>(v, key);
  else if (key == "layers") p.layers = parse_int<int>(v, key);
  else if (key == "spacing") p.spacing = parse_double(v, key);
  else if (key == "layer_gap") p.layer_gap = parse_double(v, key);
  else if (key == "axis") p.axis = parse_vec3(v, key);
  else if (key == "tilt") p.tilt = parse_double(v, key);
  else if (key == "center") p.center = parse_vec3(v, key);
  else if (key == "offset") p.offset = parse_double(v, key);
  else if (key == "frames") p.frames = parse_int<int>(v, key);
  else if (key == "amplitude") p.amplitude = parse_double(v, key);
  else if (key == "period") p.period = parse_double(v, key);
  else if (key == "transverse_split") p.transverse_split = parse_double(v, key);
  else if (key == "jitter") p.jitter = parse_double(v, key);
  else if (key == "noise") p.noise = parse_double(v, key);
  else if (key == "labeled") p.labeled = parse_bool(v, key);
  else throw InputError("unknown config key: synth_" + key);
}

inline bool apply_tool(ToolSceneParams& p, const std::string& key, const std::string& v) {
  if (key == "approach_frames") p.approach_frames = parse_int<int>(v, key);
  else if (key == "rotate_frames") p.rotate_frames = parse_int<int>(v, key);
  else if (key == "hold_frames") p.hold_frames = parse_int<int>(v, key);
  else if (key == "pull_frames") p.pull_frames = parse_int<int>(v, key);
  else if (key == "rotate_angle") p.rotate_angle = parse_double(v, key);
  else if (key == "hold_jitter") p.hold_jitter = parse_double(v, key);
  else if (key == "pull_step") p.pull_step = parse_double(v, key);
  else if (key == "stretch_gain") p.stretch_gain = parse_double(v, key);
  else if (key == "contact_inner") p.contact_inner = parse_double(v, key);
  else if (key == "contact_outer") p.contact_outer = parse_double(v, key);
  else if (key == "tool_height") p.tool_height = parse_double(v, key);
  else if (key == "wave_amplitude") p.wave_amplitude = parse_double(v, key);
  else if (key == "wave_length") p.wave_length = parse_double(v, key);
  else if (key == "wave_period") p.wave_period = parse_double(v, key);
  else return false;
  return true;
}

}  // namespace detail

inline void apply_setting(Settings& s, const std::string& key, const std::string& value) {
  RunConfig& c = s.run;
  const std::string v = detail::trim(value);
  if (key == "r_cluster") {
    c.auto_radius = v == "auto";
    if (!c.auto_radius) c.r_cluster = parse_double(v, key);
  } else if (key == "sigma") {
    c.auto_sigma = v == "auto";
    if (!c.auto_sigma) c.sigma = parse_double(v, key);
  } else if (key == "n_min") c.n_min = parse_int<int>(v, key);
  else if (key == "rest_window_tau") c.rest_window_tau = parse_int<int>(v, key);
  else if (key == "solver_iterations") c.solver_iterations = parse_int<int>(v, key);
  else if (key == "alpha_hydro") c.alpha_hydro = parse_double(v, key);
  else if (key == "alpha_devia") c.alpha_devia = parse_double(v, key);
  else if (key == "clamp_percentile") c.clamp_percentile = parse_double(v, key);
  else if (key == "eps_stiffness") c.eps_stiffness = parse_double(v, key);
  else if (key == "lambda_ema") c.lambda_ema = parse_double(v, key);
  else if (key == "pae_window") c.pae_window = parse_int<int>(v, key);
  else if (key == "eps_motion") c.eps_motion = parse_double(v, key);
  else if (key == "delta_norm") c.delta_norm = parse_double(v, key);
  else if (key == "seed") c.seed = parse_int<std::uint64_t>(v, key);
  else if (key == "jacobian_at") {
    if (v == "raw") c.jacobian_at = JacobianAt::kRaw;
    else if (v == "solved") c.jacobian_at = JacobianAt::kSolved;
    else throw InputError("jacobian_at must be raw or solved");
  } else if (key == "smooth_pas") c.smooth_pas = parse_bool(v, key);
  else if (key == "export_normalized") c.export_normalized = parse_bool(v, key);
  else if (key == "max_rgps") c.max_rgps = parse_int<int>(v, key);
  else if (key == "ply_score") {
    if (v == "pacs_smooth") c.ply_score = PlyScore::kPacsSmooth;
    else if (v == "pacs") c.ply_score = PlyScore::kPacs;
    else if (v == "pas") c.ply_score = PlyScore::kPas;
    else throw InputError("ply_score must be pacs_smooth, pacs or pas");
  } else if (key == "synth_scene") {
    if (v != "sheet" && v != "tool") throw InputError("synth_scene must be sheet or tool");
    s.synth.scene = v;
  } else if (key.rfind("synth_", 0) == 0) {
    const std::string k = key.substr(6);
    if (!detail::apply_tool(s.synth.tool, k, v)) {
      detail::apply_sheet(s.synth.sheet, k, v);
      detail::apply_sheet(s.synth.tool.sheet, k, v);
    }
  } else {
    throw InputError("unknown config key: " + key);
  }
}

inline void read_config(std::istream& in, Settings& s, const std::string& source = "config") {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    const std::string body = detail::trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw InputError(detail::where(source, n) + "expected 'key = value'");
    try {
      apply_setting(s, detail::trim(std::string_view(body).substr(0, eq)),
                    detail::trim(std::string_view(body).substr(eq + 1)));
    } catch (const InputError& e) {
      throw InputError(detail::where(source, n) + e.what());
    }
  }
}

inline std::string_view to_string(JacobianAt j) { return j == JacobianAt::kRaw ? "raw" : "solved"; }

inline std::string_view to_string(PlyScore p) {
  switch (p) {
    case PlyScore::kPacs: return "pacs";
    case PlyScore::kPas: return "pas";
    default: return "pacs_smooth";
  }
}

/// Ordered (key, value) pairs that read_config maps back onto the same RunConfig.
inline std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& c) {
  return {
      {"r_cluster", c.auto_radius ? "auto" : fmt(c.r_cluster)},
      {"n_min", std::to_string(c.n_min)},
      {"sigma", c.auto_sigma ? "auto" : fmt(c.sigma)},
      {"rest_window_tau", std::to_string(c.rest_window_tau)},
      {"solver_iterations", std::to_string(c.solver_iterations)},
      {"alpha_hydro", fmt(c.alpha_hydro)},
      {"alpha_devia", fmt(c.alpha_devia)},
      {"clamp_percentile", fmt(c.clamp_percentile)},
      {"eps_stiffness", fmt(c.eps_stiffness)},
      {"lambda_ema", fmt(c.lambda_ema)},
      {"pae_window", std::to_string(c.pae_window)},
      {"eps_motion", fmt(c.eps_motion)},
      {"delta_norm", fmt(c.delta_norm)},
      {"seed", std::to_string(c.seed)},
      {"jacobian_at", std::string(to_string(c.jacobian_at))},
      {"smooth_pas", c.smooth_pas ? "true" : "false"},
      {"export_normalized", c.export_normalized ? "true" : "false"},
      {"max_rgps", std::to_string(c.max_rgps)},
      {"ply_score", std::string(to_string(c.ply_score))},
  };
}

inline void write_config(std::ostream& out, const RunConfig& c) {
  for (const auto& [k, v] : config_entries(c)) out << k << " = " << v << '\n';
}

}  // namespace taff
