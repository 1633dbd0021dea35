#pragma once

// Per-frame, per-RGP mechanical state: neighborhood → F → XPBD solve → J, K.

#include "tissue_affordance/stiffness.hpp"

#include <algorithm>
#include <thread>

namespace taff {

/// Mechanical state of one RGP at one frame.
struct RgpFrameState {
  bool active = false;
  std::string reason;            // why inactive; empty when active
  bool anchor_present = false;
  Vec3 position = Vec3::Zero();  // anchor position at this frame
  std::size_t members = 0;
  bool unfiltered = false;
  bool low_confidence = false;
  bool solve_failed = false;
  DeformationGradient raw;       // estimate from tracked positions
  Mat3 F_solved = Mat3::Identity();
  ConstraintResiduals residual_raw;
  ConstraintResiduals residual_solved;
  double lambda_hydro = 0.0;
  double lambda_devia = 0.0;
  int iterations = 0;
  StiffnessMetric stiffness;
  CompliantDirection compliant;
};

struct SceneAnalysis {
  RunConfig cfg;  // with scale defaults resolved
  RgpSet rgps;
  RestStateMap rest;
  int frame_count = 0;
  std::vector<RgpFrameState> states;  // frame-major

  std::size_t rgp_count() const { return rgps.size(); }
  const RgpFrameState& at(int frame, std::size_t rgp) const {
    return states[static_cast<std::size_t>(frame) * rgps.size() + rgp];
  }
  RgpFrameState& at(int frame, std::size_t rgp) {
    return states[static_cast<std::size_t>(frame) * rgps.size() + rgp];
  }
};

/// Runs `fn(i)` for i in [0, n) on up to `workers` threads. Each index is
/// handled exactly once; callers write only to slot i.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned workers = std::thread::hardware_concurrency()) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
}

/// Full mechanical state of one RGP at the frame `nbh` was built for.
inline RgpFrameState analyze_neighborhood(const Neighborhood& nbh, const RunConfig& cfg) {
  RgpFrameState s;
  s.anchor_present = nbh.active || nbh.inactive_reason != "anchor_absent";
  s.position = nbh.anchor_position;
  if (!nbh.active) {
    s.reason = nbh.inactive_reason;
    return s;
  }
  s.unfiltered = nbh.unfiltered;
  s.members = nbh.size();
  if (nbh.size() < 3) {
    s.reason = "sparse_neighborhood";
    return s;
  }
  try {
    s.raw = estimate_deformation_gradient(nbh);
  } catch (const NumericalError&) {
    s.reason = "degenerate_neighborhood";
    return s;
  }
  s.low_confidence = s.raw.low_confidence;
  s.residual_raw = constraint_residuals(s.raw.F);

  const RgpSolve solve = solve_rgp(nbh, s.raw, cfg);
  s.solve_failed = solve.failed;
  s.iterations = solve.iterations;
  s.lambda_hydro = solve.lambda_hydro;
  s.lambda_devia = solve.lambda_devia;
  s.F_solved = deformation_from_offsets(solve.offsets, nbh.offsets_rest, nbh.weights,
                                        s.raw.moment_inverse);
  s.residual_solved = constraint_residuals(s.F_solved);

  DeformationGradient at = s.raw;
  if (cfg.jacobian_at == JacobianAt::kSolved) at.F = s.F_solved;
  s.stiffness = stiffness_metric(rgp_constraint_jacobian(nbh, at), cfg.eps_stiffness);
  s.compliant = compliant_direction(s.stiffness);
  s.active = true;
  return s;
}

/// Analyzes every (frame, RGP) pair for fixed RGPs and rest states.
inline SceneAnalysis analyze_frames(const TrackedScene& scene, RgpSet rgps, RestStateMap rest,
                                    const RunConfig& cfg) {
  SceneAnalysis a;
  a.cfg = cfg;
  a.rgps = std::move(rgps);
  a.rest = std::move(rest);
  a.frame_count = scene.frame_count();
  a.states.resize(static_cast<std::size_t>(a.frame_count) * a.rgps.size());
  if (a.rgps.empty()) return a;
  parallel_for(static_cast<std::size_t>(a.frame_count), [&](std::size_t t) {
    const int frame = static_cast<int>(t);
    const FrameIndex index(scene, frame, cfg.r_cluster);
    for (std::size_t r = 0; r < a.rgps.size(); ++r) {
      const auto& rgp = a.rgps.rgps[r];
      Neighborhood nbh = build_neighborhood(scene, index, rgp, cfg, a.rest);
      nbh = filter_by_segmentation(nbh, scene, frame);
      a.at(frame, r) = analyze_neighborhood(nbh, cfg);
    }
  });
  return a;
}

/// Resolves scale defaults, validates the configuration, computes rest states,
/// selects RGPs on frame 0 and analyzes every frame.
inline SceneAnalysis analyze_scene(const TrackedScene& scene, const RunConfig& cfg_in) {
  const RunConfig cfg = validate_config(resolve_auto_radius(cfg_in, scene));
  auto rest = compute_rest_states(scene, cfg);
  auto rgps = select_rgps(scene, cfg);
  return analyze_frames(scene, std::move(rgps), std::move(rest), cfg);
}

}  // namespace taff
