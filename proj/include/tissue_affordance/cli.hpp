#pragma once

// Command-line front end: affordance, validate, sweep and synth subcommands.
// Exit codes: 0 success, 1 input error, 2 numerical failure. Failed runs
// remove every file they created.

#include "tissue_affordance/export.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>

namespace taff {

namespace cli_detail {

namespace fs = std::filesystem;

/// Output files of one run; rolls back on failure.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}

  void open() {
    if (dir_.empty()) throw InputError("--out is required");
    if (!fs::exists(dir_)) {
      fs::create_directories(dir_);
      created_dirs_.push_back(dir_);
    } else if (!fs::is_directory(dir_)) {
      throw InputError("output path is not a directory: " + dir_.string());
    }
  }

  void subdir(const std::string& name) {
    const fs::path p = dir_ / name;
    if (!fs::exists(p)) {
      fs::create_directories(p);
      created_dirs_.push_back(p);
    }
  }

  void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    const fs::path p = dir_ / name;
    files_.push_back(p);
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("cannot write " + p.string());
    body(f);
    f.flush();
    if (!f) throw InputError("write failed: " + p.string());
  }

  void rollback() noexcept {
    std::error_code ec;
    for (auto it = files_.rbegin(); it != files_.rend(); ++it) fs::remove(*it, ec);
    for (auto it = created_dirs_.rbegin(); it != created_dirs_.rend(); ++it) fs::remove(*it, ec);
    files_.clear();
    created_dirs_.clear();
  }

 private:
  fs::path dir_;
  std::vector<fs::path> files_;
  std::vector<fs::path> created_dirs_;
};

struct Options {
  std::string tracks, poses, keypoints, config, out;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string iterations = "1,5,10,20";
};

inline Settings load_settings(const Options& o) {
  Settings s;
  if (!o.config.empty()) {
    auto f = open_input(o.config);
    read_config(f, s, o.config);
  }
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InputError("--override expects key=value, got '" + kv + "'");
    apply_setting(s, detail::trim(std::string_view(kv).substr(0, eq)),
                  detail::trim(std::string_view(kv).substr(eq + 1)));
  }
  if (o.seed) s.run.seed = *o.seed;
  return s;
}

inline std::vector<int> parse_iterations(const std::string& text) {
  std::vector<int> out;
  for (const auto& part : detail::split(text)) out.push_back(parse_int<int>(part, "--iterations"));
  return out;
}

inline TrackedScene load_tracks(const Options& o) {
  if (o.tracks.empty()) throw InputError("--tracks is required");
  return read_tracks_file(o.tracks);
}

inline nlohmann::ordered_json config_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["r_cluster"] = c.r_cluster;
  j["auto_radius"] = c.auto_radius;
  j["n_min"] = c.n_min;
  j["sigma"] = c.sigma;
  j["auto_sigma"] = c.auto_sigma;
  j["rest_window_tau"] = c.rest_window_tau;
  j["solver_iterations"] = c.solver_iterations;
  j["alpha_hydro"] = c.alpha_hydro;
  j["alpha_devia"] = c.alpha_devia;
  j["clamp_percentile"] = c.clamp_percentile;
  j["eps_stiffness"] = c.eps_stiffness;
  j["lambda_ema"] = c.lambda_ema;
  j["pae_window"] = c.pae_window;
  j["eps_motion"] = c.eps_motion;
  j["delta_norm"] = c.delta_norm;
  j["seed"] = c.seed;
  j["jacobian_at"] = to_string(c.jacobian_at);
  j["smooth_pas"] = c.smooth_pas;
  j["export_normalized"] = c.export_normalized;
  j["max_rgps"] = c.max_rgps;
  j["ply_score"] = to_string(c.ply_score);
  return j;
}

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline void write_summary(OutputSet& out, const nlohmann::ordered_json& j) {
  out.write("run_summary.json", [&](std::ostream& f) { f << j.dump(2) << '\n'; });
}

inline nlohmann::ordered_json scene_counts(const TrackedScene& scene, const SceneAnalysis& a) {
  std::size_t active = 0;
  for (const auto& s : a.states) active += s.active ? 1 : 0;
  nlohmann::ordered_json c;
  c["frames"] = scene.frame_count();
  c["points"] = scene.point_count();
  c["rgps"] = a.rgp_count();
  c["active_rgp_frames"] = active;
  return c;
}

inline void cmd_affordance(const Options& o, OutputSet& out, nlohmann::ordered_json& summary) {
  const auto t0 = Clock::now();
  const Settings s = load_settings(o);
  if (o.poses.empty() && o.keypoints.empty()) throw InputError("no tool pose source");
  if (!o.poses.empty() && !o.keypoints.empty())
    throw InputError("provide exactly one of --poses or --keypoints");
  const TrackedScene scene = load_tracks(o);
  ToolTrajectory tool;
  if (!o.poses.empty()) {
    auto f = open_input(o.poses);
    tool = ToolTrajectory::from_poses(read_poses(f, o.poses));
  } else {
    auto f = open_input(o.keypoints);
    tool = trajectory_from_keypoints(read_keypoints(f, o.keypoints));
  }
  const double t_load = seconds_since(t0);

  const auto t1 = Clock::now();
  const SceneAnalysis a = analyze_scene(scene, s.run);
  const double t_mech = seconds_since(t1);
  const auto t2 = Clock::now();
  const AffordanceField field = compute_affordance_field(scene, a, tool);
  const double t_aff = seconds_since(t2);

  std::vector<std::string> warnings = a.rgps.warnings;
  if (tool.frame_count() < scene.frame_count())
    warnings.push_back("tool poses cover " + std::to_string(tool.frame_count()) + " of " +
                       std::to_string(scene.frame_count()) + " frames");

  out.open();
  out.write("affordance.csv", [&](std::ostream& f) { write_affordance(f, field, a.cfg.export_normalized); });
  out.write("rgps.csv", [&](std::ostream& f) { write_rgps(f, a.rgps); });
  out.write("stiffness.csv", [&](std::ostream& f) { write_stiffness(f, a); });
  out.write("diagnostics.csv", [&](std::ostream& f) { write_diagnostics(f, a); });
  out.subdir("ply");
  for (int t = 0; t < field.frame_count; ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "ply/frame_%04d.ply", t);
    out.write(name, [&](std::ostream& f) { write_ply_frame(f, field, t, a.cfg.ply_score); });
  }

  std::size_t valid = 0;
  for (const auto& e : field.entries) valid += e.valid ? 1 : 0;
  summary["config"] = config_json(a.cfg);
  summary["counts"] = scene_counts(scene, a);
  summary["counts"]["affordance_rows"] = field.entries.size();
  summary["counts"]["valid_entries"] = valid;
  summary["timings_s"] = {{"load", t_load}, {"mechanics", t_mech}, {"affordance", t_aff}};
  summary["warnings"] = warnings;
  write_summary(out, summary);
}

inline void cmd_validate(const Options& o, OutputSet& out, nlohmann::ordered_json& summary) {
  const auto t0 = Clock::now();
  const Settings s = load_settings(o);
  const TrackedScene scene = load_tracks(o);
  const SceneAnalysis a = analyze_scene(scene, s.run);
  const auto samples = validation_samples(scene, a);
  const auto sum = summarize_validation(samples);
  const SweepRow row{a.cfg.solver_iterations, sum.median_cos_compliant, sum.median_cos_baseline, sum.n_samples};

  out.open();
  out.write("validation_samples.csv", [&](std::ostream& f) { write_samples(f, samples); });
  out.write("validation_summary.csv", [&](std::ostream& f) { write_sweep(f, std::span(&row, 1)); });
  summary["config"] = config_json(a.cfg);
  summary["counts"] = scene_counts(scene, a);
  summary["median_cos_compliant"] = sum.median_cos_compliant;
  summary["median_cos_baseline"] = sum.median_cos_baseline;
  summary["n_samples"] = sum.n_samples;
  summary["timings_s"] = {{"total", seconds_since(t0)}};
  summary["warnings"] = a.rgps.warnings;
  write_summary(out, summary);
}

inline void cmd_sweep(const Options& o, OutputSet& out, nlohmann::ordered_json& summary) {
  const auto t0 = Clock::now();
  const Settings s = load_settings(o);
  const auto iters = parse_iterations(o.iterations);
  const TrackedScene scene = load_tracks(o);
  std::vector<std::vector<ValidationSample>> samples;
  const auto rows = iteration_sweep(scene, iters, s.run, &samples);

  out.open();
  out.write("sweep.csv", [&](std::ostream& f) { write_sweep(f, rows); });
  out.write("sweep_samples.csv", [&](std::ostream& f) {
    for (std::size_t k = 0; k < rows.size(); ++k) {
      std::ostringstream block;
      write_samples(block, samples[k], rows[k].iterations);
      std::string text = block.str();
      if (k > 0) text = text.substr(text.find('\n') + 1);  // single header
      f << text;
    }
  });
  summary["config"] = config_json(validate_config(resolve_auto_radius(s.run, scene)));
  summary["iterations"] = iters;
  summary["timings_s"] = {{"total", seconds_since(t0)}};
  write_summary(out, summary);
}

inline void cmd_synth(const Options& o, OutputSet& out, nlohmann::ordered_json& summary) {
  const Settings s = load_settings(o);
  const std::uint64_t seed = s.run.seed;
  SyntheticScene scene;
  ToolTrajectory tool;
  if (s.synth.scene == "tool") {
    auto t = generate_tool_interaction_scene(s.synth.tool, seed);
    scene = std::move(t.synthetic);
    tool = std::move(t.tool);
  } else {
    scene = generate_anisotropic_sheet(s.synth.sheet, seed);
    tool = sheet_tool_trajectory(s.synth.sheet);
  }
  out.open();
  out.write("tracks.csv", [&](std::ostream& f) { write_tracks(f, scene.scene); });
  out.write("poses.csv", [&](std::ostream& f) { write_poses(f, tool.poses); });
  out.write("ground_truth.csv", [&](std::ostream& f) { write_ground_truth(f, scene); });
  summary["scene"] = s.synth.scene;
  summary["seed"] = seed;
  summary["frames"] = scene.scene.frame_count();
  summary["points"] = scene.scene.point_count();
  write_summary(out, summary);
}

inline void error_line(std::ostream& err, int code, std::string_view message) {
  nlohmann::ordered_json j;
  j["status"] = "error";
  j["exit_code"] = code;
  j["message"] = message;
  err << j.dump() << '\n';
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  using namespace cli_detail;
  CLI::App app{"Physics-aware tissue affordance pipeline"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key = value configuration file");
    sub->add_option("--override", o.overrides, "key=value, repeatable")->take_all();
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--out", o.out, "output directory")->required();
  };
  auto* aff = app.add_subcommand("affordance", "PACS/PAS field, stiffness and solver dumps");
  add_common(aff);
  aff->add_option("--tracks", o.tracks, "tracks CSV")->required();
  aff->add_option("--poses", o.poses, "tool poses CSV");
  aff->add_option("--keypoints", o.keypoints, "tool keypoints CSV");
  auto* val = app.add_subcommand("validate", "compliant direction vs observed motion");
  add_common(val);
  val->add_option("--tracks", o.tracks, "tracks CSV")->required();
  auto* swp = app.add_subcommand("sweep", "validation medians over solver iteration counts");
  add_common(swp);
  swp->add_option("--tracks", o.tracks, "tracks CSV")->required();
  swp->add_option("--iterations", o.iterations, "ascending list, e.g. 1,5,10,20");
  auto* syn = app.add_subcommand("synth", "generate a synthetic scene");
  add_common(syn);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    error_line(err, 1, e.what());
    return 1;
  }

  OutputSet outputs(o.out);
  nlohmann::ordered_json summary;
  try {
    if (aff->parsed()) {
      summary["command"] = "affordance";
      cmd_affordance(o, outputs, summary);
    } else if (val->parsed()) {
      summary["command"] = "validate";
      cmd_validate(o, outputs, summary);
    } else if (swp->parsed()) {
      summary["command"] = "sweep";
      cmd_sweep(o, outputs, summary);
    } else {
      summary["command"] = "synth";
      cmd_synth(o, outputs, summary);
    }
  } catch (const InputError& e) {
    outputs.rollback();
    error_line(err, 1, e.what());
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    outputs.rollback();
    error_line(err, 1, e.what());
    return 1;
  } catch (const NumericalError& e) {
    outputs.rollback();
    error_line(err, 2, e.what());
    return 2;
  } catch (const std::exception& e) {
    outputs.rollback();
    error_line(err, 2, e.what());
    return 2;
  }
  return 0;
}

}  // namespace taff
