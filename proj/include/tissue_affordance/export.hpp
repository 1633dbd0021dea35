#pragma once

// Output tables (frame-major, then RGP order) and per-frame PLY clouds.

#include "tissue_affordance/affordance.hpp"
#include "tissue_affordance/evaluation.hpp"
#include "tissue_affordance/io.hpp"

namespace taff {

inline void write_rgps(std::ostream& out, const RgpSet& rgps) {
  out << "rgp_id,anchor_point_id,x0,y0,z0,label\n";
  for (const auto& r : rgps.rgps) {
    out << r.rgp_id << ',' << r.anchor_point_id << ',' << fmt(r.position0.x()) << ','
        << fmt(r.position0.y()) << ',' << fmt(r.position0.z()) << ','
        << (r.label_at_selection ? std::to_string(*r.label_at_selection) : std::string()) << '\n';
  }
}

/// Flag codes: ok, inactive:<reason>, low_confidence, solve_failed, unfiltered ('|'-joined).
inline std::string state_flag(const RgpFrameState& s) {
  if (!s.active) return "inactive:" + s.reason;
  std::string f;
  if (s.low_confidence) detail::add_reason(f, "low_confidence");
  if (s.solve_failed) detail::add_reason(f, "solve_failed");
  if (s.unfiltered) detail::add_reason(f, "unfiltered");
  return f.empty() ? "ok" : f;
}

// det_F and tr_FtF describe the tracked estimate; c_hydro and c_devia are the
// residuals left after the solve.
inline void write_diagnostics(std::ostream& out, const SceneAnalysis& a) {
  out << "frame,rgp_id,det_F,tr_FtF,c_hydro,c_devia,condition,flag\n";
  for (int t = 0; t < a.frame_count; ++t) {
    for (std::size_t r = 0; r < a.rgp_count(); ++r) {
      const auto& s = a.at(t, r);
      out << t << ',' << a.rgps.rgps[r].rgp_id << ',';
      if (s.active) {
        out << fmt(s.raw.F.determinant()) << ',' << fmt(s.raw.F.squaredNorm()) << ','
            << fmt(s.residual_solved.c_hydro) << ',' << fmt(s.residual_solved.c_devia) << ','
            << fmt(s.raw.condition_estimate);
      } else {
        out << ",,,,";
      }
      out << ',' << state_flag(s) << '\n';
    }
  }
}

inline void write_stiffness(std::ostream& out, const SceneAnalysis& a) {
  out << "frame,rgp_id,eig1,eig2,eig3,ev1x,ev1y,ev1z,degenerate_flag\n";
  for (int t = 0; t < a.frame_count; ++t) {
    for (std::size_t r = 0; r < a.rgp_count(); ++r) {
      const auto& s = a.at(t, r);
      out << t << ',' << a.rgps.rgps[r].rgp_id << ',';
      if (!s.active) {
        out << ",,,,,,\n";
        continue;
      }
      const Vec3& ev = s.stiffness.eigenvalues;
      const Vec3& d = s.compliant.direction;
      out << fmt(ev(0)) << ',' << fmt(ev(1)) << ',' << fmt(ev(2)) << ',' << fmt(d.x()) << ','
          << fmt(d.y()) << ',' << fmt(d.z()) << ',' << (s.compliant.degenerate ? 1 : 0) << '\n';
    }
  }
}

inline void write_affordance(std::ostream& out, const AffordanceField& f, bool with_normalized) {
  out << "frame,rgp_id,x,y,z,pace,pacs,pacs_smooth,pae,pas,eig_min,eig_max,evx,evy,evz,valid,reason";
  if (with_normalized) out << ",pacs_norm";
  out << '\n';
  for (const auto& e : f.entries) {
    out << e.frame << ',' << e.rgp_id << ',' << fmt(e.position.x()) << ',' << fmt(e.position.y()) << ','
        << fmt(e.position.z()) << ',';
    if (e.valid) out << fmt(e.pace) << ',' << fmt(e.pacs) << ',' << fmt(e.pacs_smooth) << ',';
    else out << ",,,";
    out << fmt(e.pae) << ',' << fmt(e.pas) << ',';
    if (e.eig_max > 0.0) {
      out << fmt(e.eig_min) << ',' << fmt(e.eig_max) << ',' << fmt(e.compliant.x()) << ','
          << fmt(e.compliant.y()) << ',' << fmt(e.compliant.z()) << ',';
    } else {
      out << ",,,,,";
    }
    out << (e.valid ? 1 : 0) << ',' << e.reason;
    if (with_normalized) out << ',' << fmt(e.pacs_norm);
    out << '\n';
  }
}

/// Blue (low) → red (high) ramp through white.
inline std::array<int, 3> score_color(double unit) {
  const double u = std::clamp(unit, 0.0, 1.0);
  auto byte = [](double x) { return static_cast<int>(std::lround(255.0 * std::clamp(x, 0.0, 1.0))); };
  if (u < 0.5) return {byte(2.0 * u), byte(2.0 * u), 255};
  return {255, byte(2.0 * (1.0 - u)), byte(2.0 * (1.0 - u))};
}

inline std::optional<double> ply_value(const AffordanceEntry& e, PlyScore which) {
  switch (which) {
    case PlyScore::kPacs: return e.valid ? std::optional<double>(e.pacs) : std::nullopt;
    case PlyScore::kPas: return e.pas;
    default: return e.pacs_smooth;
  }
}

/// ASCII PLY of one frame's RGPs that carry the chosen score; colors are the
/// per-frame min-max normalized score.
inline void write_ply_frame(std::ostream& out, const AffordanceField& f, int frame, PlyScore which) {
  std::vector<std::pair<const AffordanceEntry*, double>> pts;
  for (std::size_t r = 0; r < f.rgp_count; ++r) {
    const auto& e = f.at(frame, r);
    if (const auto v = ply_value(e, which)) pts.emplace_back(&e, *v);
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& [e, v] : pts) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  out << "ply\nformat ascii 1.0\ncomment score " << to_string(which) << "\nelement vertex " << pts.size()
      << "\nproperty double x\nproperty double y\nproperty double z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nproperty double score\n"
         "end_header\n";
  for (const auto& [e, v] : pts) {
    const auto c = score_color(hi > lo ? (v - lo) / (hi - lo) : 0.5);
    out << fmt(e->position.x()) << ' ' << fmt(e->position.y()) << ' ' << fmt(e->position.z()) << ' '
        << c[0] << ' ' << c[1] << ' ' << c[2] << ' ' << fmt(v) << '\n';
  }
}

inline void write_samples(std::ostream& out, std::span<const ValidationSample> samples,
                          std::optional<int> iterations = std::nullopt) {
  if (iterations) out << "iterations,";
  out << "frame,rgp_id,excluded,reason,cos_compliant,cos_baseline,degenerate\n";
  for (const auto& s : samples) {
    if (iterations) out << *iterations << ',';
    out << s.frame << ',' << s.rgp_id << ',' << (s.excluded ? 1 : 0) << ',' << s.reason << ',';
    if (!s.excluded) out << fmt(s.cos_compliant);
    out << ',' << fmt(s.cos_baseline) << ',' << (s.degenerate ? 1 : 0) << '\n';
  }
}

inline void write_sweep(std::ostream& out, std::span<const SweepRow> rows) {
  out << "iterations,median_cos_compliant,median_cos_baseline,n_samples\n";
  for (const auto& r : rows) {
    out << r.iterations << ',' << fmt(r.median_cos_compliant) << ',' << fmt(r.median_cos_baseline) << ','
        << r.n_samples << '\n';
  }
}

inline void write_ground_truth(std::ostream& out, const SyntheticScene& s) {
  out << "point_id,gt_dir_x,gt_dir_y,gt_dir_z\n";
  for (std::size_t i = 0; i < s.ground_truth.size(); ++i) {
    const Vec3& d = s.ground_truth[i];
    out << s.scene.id(i) << ',' << fmt(d.x()) << ',' << fmt(d.y()) << ',' << fmt(d.z()) << '\n';
  }
}

}  // namespace taff
