#pragma once

// Seeded synthetic scenes with known compliant directions.
//
// The sheet is a two-layer slab spanned by the compliant axis a and an
// in-plane direction d, with layers stacked along m = a × d. Each neighborhood
// then sees its rest offsets off-centred along m only, and the stretch
// S = diag(s, s^-p, s^-(1-p)) in the (a, b, c) basis puts the null space of the
// constraint Jacobian exactly on a whenever the two transverse stretches differ.

#include "tissue_affordance/kinematics.hpp"

#include <numbers>
#include <random>

namespace taff {

struct SheetParams {
  int n = 24;                      // grid points per side
  int layers = 2;
  double spacing = 1e-3;           // m
  double layer_gap = 1e-3;         // m
  Vec3 axis = Vec3(0.6, 0.48, 0.64);
  double tilt = std::numbers::pi / 4;  // angle of d from b inside the (b, c) plane
  Vec3 center = Vec3(0.01, -0.02, 0.08);
  double offset = 2.0;             // sheet starts this many sheet widths along a from center
  int frames = 100;
  double amplitude = 0.05;         // s(t) = 1 + amplitude·sin(2πt/period)
  double period = 3.3;             // frames
  double transverse_split = 1.0;   // p; 0.5 is the symmetric 1/√s case
  double jitter = 0.15;            // in-plane material jitter, fraction of spacing
  double noise = 1e-5;             // m, i.i.d. per coordinate per frame
  bool labeled = true;
  double fps = 30.0;
};

struct SyntheticScene {
  TrackedScene scene;
  std::vector<Vec3> ground_truth;  // per dense point index, unit
  std::uint64_t seed = 0;
};

/// Orthonormal (a, b, c) with a = normalized axis.
inline Mat3 sheet_basis(const Vec3& axis) {
  if (!(axis.norm() > 0.0) || !axis.allFinite()) throw InputError("sheet axis must be a nonzero vector");
  const Vec3 a = axis.normalized();
  int k = 0;
  a.cwiseAbs().minCoeff(&k);
  const Vec3 w = Vec3::Unit(k);
  const Vec3 b = (w - w.dot(a) * a).normalized();
  Mat3 basis;
  basis << a, b, a.cross(b);
  return basis;
}

inline Mat3 anisotropic_stretch(const Mat3& basis, double s, double split) {
  const Vec3 diag(s, std::pow(s, -split), std::pow(s, -(1.0 - split)));
  return basis * diag.asDiagonal() * basis.transpose();
}

namespace detail {

inline void check_sheet(const SheetParams& p) {
  if (p.n < 4) throw InputError("grid too small");
  if (p.layers < 1) throw InputError("layers must be at least 1");
  if (!(p.spacing > 0.0) || !(p.layer_gap > 0.0)) throw InputError("spacing must be positive");
  if (p.frames < 2) throw InputError("need at least 2 frames");
  if (!(p.period > 0.0)) throw InputError("period must be positive");
  if (!(p.amplitude >= 0.0 && p.amplitude < 1.0)) throw InputError("amplitude must lie in [0,1)");
  if (!(p.noise >= 0.0)) throw InputError("noise must be non-negative");
  if (!(p.jitter >= 0.0 && p.jitter < 0.5)) throw InputError("jitter must lie in [0,0.5)");
}

// Material offsets from p.center in (a, d, m) coordinates, id order.
inline std::vector<Vec3> slab_material(const SheetParams& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-p.jitter, p.jitter);
  const double width = (p.n - 1) * p.spacing;
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(p.layers * p.n * p.n));
  for (int l = 0; l < p.layers; ++l) {
    for (int i = 0; i < p.n; ++i) {
      for (int j = 0; j < p.n; ++j) {
        const double xa = p.offset * width + (i + u(rng)) * p.spacing;
        const double xd = (j - 0.5 * (p.n - 1) + u(rng)) * p.spacing;
        const double xm = (l - 0.5 * (p.layers - 1)) * p.layer_gap;
        out.emplace_back(xa, xd, xm);
      }
    }
  }
  return out;
}

}  // namespace detail

/// Columns a, d, m of the slab frame.
inline Mat3 slab_frame(const SheetParams& p) {
  const Mat3 abc = sheet_basis(p.axis);
  const Vec3 d = std::cos(p.tilt) * abc.col(1) + std::sin(p.tilt) * abc.col(2);
  Mat3 f;
  f << abc.col(0), d, abc.col(0).cross(d);
  return f;
}

inline SyntheticScene generate_anisotropic_sheet(const SheetParams& p, std::uint64_t seed) {
  detail::check_sheet(p);
  std::mt19937_64 rng(seed);
  const Mat3 abc = sheet_basis(p.axis);
  const Mat3 frame = slab_frame(p);
  const auto material = detail::slab_material(p, rng);

  std::vector<PointId> ids(material.size());
  for (std::size_t k = 0; k < ids.size(); ++k) ids[k] = static_cast<PointId>(k);
  SceneBuilder builder(p.frames, ids, p.fps);
  std::normal_distribution<double> noise(0.0, 1.0);

  for (int t = 0; t < p.frames; ++t) {
    const double s = 1.0 + p.amplitude * std::sin(2.0 * std::numbers::pi * t / p.period);
    const Mat3 S = anisotropic_stretch(abc, s, p.transverse_split);
    for (std::size_t k = 0; k < material.size(); ++k) {
      Vec3 x = p.center + S * (frame * material[k]);
      if (p.noise > 0.0) x += p.noise * Vec3(noise(rng), noise(rng), noise(rng));
      builder.set(t, k, x, p.labeled ? std::optional<int>(0) : std::nullopt);
    }
  }
  SyntheticScene out{std::move(builder).build(), {}, seed};
  out.ground_truth.assign(material.size(), abc.col(0));
  return out;
}

/// A tool whose origin rides 5 mm above the sheet's middle, axis along a.
/// Gives the sheet scene a pose source for end-to-end runs.
inline ToolTrajectory sheet_tool_trajectory(const SheetParams& p) {
  detail::check_sheet(p);
  const Mat3 abc = sheet_basis(p.axis);
  const Mat3 frame = slab_frame(p);
  const double width = (p.n - 1) * p.spacing;
  const Vec3 mid = frame * Vec3(p.offset * width + 0.5 * width, 0.0, 0.0);
  const Mat3 rot = detail::complete_frame(abc.col(0));
  std::vector<std::optional<RigidPose>> poses;
  for (int t = 0; t < p.frames; ++t) {
    const double s = 1.0 + p.amplitude * std::sin(2.0 * std::numbers::pi * t / p.period);
    const Vec3 o = p.center + anisotropic_stretch(abc, s, p.transverse_split) * mid + 5e-3 * frame.col(2);
    poses.emplace_back(RigidPose{rot, o});
  }
  return ToolTrajectory::from_poses(std::move(poses));
}

// ---------------------------------------------------------------------------
// Tool interaction
// ---------------------------------------------------------------------------

struct ToolSceneParams {
  SheetParams sheet = [] {
    SheetParams s;
    s.offset = -0.5;  // sheet centred on `center`
    s.noise = 2e-5;
    return s;
  }();
  int approach_frames = 15;
  int rotate_frames = 15;
  int hold_frames = 20;
  int pull_frames = 30;
  double rotate_angle = 0.4;       // rad, about the tool's secondary axis
  double hold_jitter = 3e-4;       // m, per-component std of the hold pose jitter
  double pull_step = 5e-4;         // m per frame along a
  double stretch_gain = 10.0;      // s = 1 + gain·(pulled distance)
  double contact_inner = 4e-3;     // m, full coupling inside
  double contact_outer = 8e-3;     // m, no coupling outside
  double tool_height = 5e-3;       // m above the contact point along m
  double wave_amplitude = 3e-4;    // m, physiological background motion along m
  double wave_length = 10e-3;      // m
  double wave_period = 25.0;       // frames
};

struct Segment {
  int begin = 0;  // first transition
  int end = 0;    // one past the last transition
};

struct ToolInteractionScene {
  SyntheticScene synthetic;
  ToolTrajectory tool;
  std::vector<double> contact_weight;  // per dense point index, in [0,1]
  Vec3 pull_direction = Vec3::UnitX();
  Segment approach, rotate, hold, pull;
};

inline int total_frames(const ToolSceneParams& p) {
  return p.approach_frames + p.rotate_frames + p.hold_frames + p.pull_frames;
}

inline double contact_blend(double r, double inner, double outer) {
  if (r <= inner) return 1.0;
  if (r >= outer) return 0.0;
  const double x = (r - inner) / (outer - inner);
  return 1.0 - x * x * (3.0 - 2.0 * x);
}

inline ToolInteractionScene generate_tool_interaction_scene(const ToolSceneParams& p, std::uint64_t seed) {
  SheetParams sp = p.sheet;
  sp.frames = total_frames(p);
  detail::check_sheet(sp);
  if (p.approach_frames < 2 || p.rotate_frames < 1 || p.hold_frames < 2 || p.pull_frames < 2)
    throw InputError("tool scene segments too short");
  if (!(p.contact_outer > p.contact_inner) || !(p.contact_inner >= 0.0))
    throw InputError("contact radii must satisfy 0 <= inner < outer");

  std::mt19937_64 rng(seed);
  const Mat3 abc = sheet_basis(sp.axis);
  const Mat3 frame = slab_frame(sp);
  const Vec3 a = abc.col(0);
  const Vec3 m = frame.col(2);
  const auto material = detail::slab_material(sp, rng);
  const double width = (sp.n - 1) * sp.spacing;
  const Vec3 contact = sp.center + frame * Vec3(sp.offset * width + 0.5 * width, 0.0, 0.0);

  ToolInteractionScene out;
  out.pull_direction = a;
  out.approach = {0, p.approach_frames - 1};
  out.rotate = {out.approach.end, out.approach.end + p.rotate_frames};
  out.hold = {out.rotate.end, out.rotate.end + p.hold_frames};
  out.pull = {out.hold.end, sp.frames - 1};

  // Tool poses.
  const Mat3 r0 = detail::complete_frame(-m);
  const Vec3 o0 = contact + p.tool_height * m;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::optional<RigidPose>> poses;
  for (int f = 0; f < sp.frames; ++f) {
    Mat3 rot = r0;
    Vec3 o = o0;
    if (f >= out.rotate.begin + 1) {
      const int k = std::min(f - out.rotate.begin, p.rotate_frames);
      rot = so3_exp(r0.col(1) * (p.rotate_angle * k / p.rotate_frames)) * r0;
    }
    if (f > out.hold.begin && f < out.hold.end)
      o += p.hold_jitter * Vec3(gauss(rng), gauss(rng), gauss(rng));
    if (f > out.pull.begin) o += a * (p.pull_step * (f - out.pull.begin));
    poses.emplace_back(RigidPose{rot, o});
  }
  out.tool = ToolTrajectory::from_poses(std::move(poses));

  // Tissue.
  std::vector<PointId> ids(material.size());
  for (std::size_t k = 0; k < ids.size(); ++k) ids[k] = static_cast<PointId>(k);
  SceneBuilder builder(sp.frames, ids, sp.fps);
  std::vector<Vec3> rest(material.size());
  out.contact_weight.resize(material.size());
  for (std::size_t k = 0; k < material.size(); ++k) {
    rest[k] = sp.center + frame * material[k];
    const Vec3 rel = rest[k] - contact;
    const double r_plane = (rel - rel.dot(m) * m).norm();
    out.contact_weight[k] = contact_blend(r_plane, p.contact_inner, p.contact_outer);
  }
  const double k_wave = 2.0 * std::numbers::pi / p.wave_length;
  for (int f = 0; f < sp.frames; ++f) {
    const double pulled = p.pull_step * std::max(0, f - out.pull.begin);
    const Mat3 S = anisotropic_stretch(abc, 1.0 + p.stretch_gain * pulled, sp.transverse_split);
    const double phase = 2.0 * std::numbers::pi * f / p.wave_period;
    for (std::size_t k = 0; k < material.size(); ++k) {
      const double beta = out.contact_weight[k];
      const Vec3 rel = rest[k] - contact;
      const Vec3 pulled_pos = contact + S * rel + pulled * a;
      const double wave = p.wave_amplitude * std::sin(k_wave * rel.dot(a) - phase);
      Vec3 x = beta * pulled_pos + (1.0 - beta) * (rest[k] + wave * m);
      if (sp.noise > 0.0) x += sp.noise * Vec3(gauss(rng), gauss(rng), gauss(rng));
      builder.set(f, k, x, sp.labeled ? std::optional<int>(0) : std::nullopt);
    }
  }
  out.synthetic = SyntheticScene{std::move(builder).build(), {}, seed};
  out.synthetic.ground_truth.assign(material.size(), a);
  return out;
}

}  // namespace taff
