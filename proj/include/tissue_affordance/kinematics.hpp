#pragma once

// SE(3) pose handling: rotation log/exp, incremental twists, rigidly induced
// displacements and tool poses from 3D keypoints.

#include "tissue_affordance/core.hpp"

#include <numbers>

namespace taff {

inline Mat3 hat(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

inline Vec3 vee(const Mat3& m) { return Vec3(m(2, 1), m(0, 2), m(1, 0)); }

/// Rodrigues formula with a Taylor expansion for tiny angles.
inline Mat3 so3_exp(const Vec3& w) {
  const double theta2 = w.squaredNorm();
  const Mat3 k = hat(w);
  double a, b;
  if (theta2 < 1e-16) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    const double theta = std::sqrt(theta2);
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Mat3::Identity() + a * k + b * k * k;
}

/// Principal rotation logarithm, returned as a rotation vector with norm in [0, π].
inline Vec3 so3_log(const Mat3& r) {
  if (!is_rotation(r)) throw InputError("so3_log: input is not a rotation matrix");

  const Vec3 skew = 0.5 * vee(r - r.transpose());  // sin(θ)·n
  const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double s = skew.norm();
  const double theta = std::atan2(s, c);

  if (theta < 1e-7) return skew;  // first order

  if (theta > std::numbers::pi - 1e-5) {
    // (R + Rᵀ)/2 = cos θ·I + (1 − cos θ)·n nᵀ; take the dominant column of n nᵀ.
    const Mat3 nnt = (0.5 * (r + r.transpose()) - c * Mat3::Identity()) / (1.0 - c);
    int k = 0;
    nnt.diagonal().maxCoeff(&k);
    Vec3 n = nnt.col(k) / std::sqrt(nnt(k, k));
    n.normalize();
    int j = 0;
    skew.cwiseAbs().maxCoeff(&j);
    if (skew[j] != 0.0) {
      if (n[j] * skew[j] < 0.0) n = -n;
    } else {
      // θ = π exactly: both signs are valid; pick the first nonzero component positive.
      for (int i = 0; i < 3; ++i) {
        if (std::abs(n[i]) > 1e-12) {
          if (n[i] < 0.0) n = -n;
          break;
        }
      }
    }
    return theta * n;
  }

  return (theta / s) * skew;
}

/// ξ_t from consecutive poses: v = Δo, ω = Log(R_{t+1} R_tᵀ).
inline Twist incremental_twist(const RigidPose& from, const RigidPose& to) {
  Twist xi;
  xi.v = to.origin - from.origin;
  xi.omega = so3_log(to.rotation * from.rotation.transpose());
  return xi;
}

/// Δp = v + ω × (p − o)
inline Vec3 induced_displacement(const Twist& xi, const Vec3& p, const Vec3& o) {
  return xi.v + xi.omega.cross(p - o);
}

/// [ I₃ | −[p − o]× ], so that Δp = J_pt · [v; ω].
inline Mat36 point_jacobian(const Vec3& p, const Vec3& o) {
  Mat36 j;
  j.leftCols<3>() = Mat3::Identity();
  j.rightCols<3>() = -hat(p - o);
  return j;
}

// ---------------------------------------------------------------------------
// Tool trajectory
// ---------------------------------------------------------------------------

/// Per-frame tool pose (absent when unavailable) and per-transition twist.
struct ToolTrajectory {
  std::vector<std::optional<RigidPose>> poses;
  std::vector<std::optional<Twist>> twists;  // size = poses.size() - 1 (or 0)

  int frame_count() const { return static_cast<int>(poses.size()); }

  static ToolTrajectory from_poses(std::vector<std::optional<RigidPose>> poses) {
    ToolTrajectory t;
    t.poses = std::move(poses);
    if (t.poses.size() > 1) {
      t.twists.resize(t.poses.size() - 1);
      for (std::size_t i = 0; i + 1 < t.poses.size(); ++i) {
        if (t.poses[i] && t.poses[i + 1])
          t.twists[i] = incremental_twist(*t.poses[i], *t.poses[i + 1]);
      }
    }
    return t;
  }
};

// ---------------------------------------------------------------------------
// Tool pose from keypoints
// ---------------------------------------------------------------------------

/// Per-frame 3D keypoints (meters); missing frames have an empty list.
struct ToolKeypoints {
  std::vector<std::vector<Vec3>> frames;
};

namespace detail {

inline Vec3 first_frame_sign(Vec3 axis) {
  constexpr double tie = 1e-12;
  for (int i : {2, 0, 1}) {
    if (axis[i] > tie) return axis;
    if (axis[i] < -tie) return -axis;
  }
  return axis;
}

// Gram–Schmidt against the world axis least parallel to `e1`.
inline Mat3 complete_frame(const Vec3& e1) {
  int k = 0;
  e1.cwiseAbs().minCoeff(&k);
  const Vec3 w = Vec3::Unit(k);
  const Vec3 e2 = (w - w.dot(e1) * e1).normalized();
  const Vec3 e3 = e1.cross(e2);
  Mat3 r;
  r << e1, e2, e3;
  return r;
}

}  // namespace detail

/// Centroid as origin, principal covariance axis as the first rotation column.
/// The axis sign follows `prev_axis` when given; otherwise z ≥ 0 (ties: x ≥ 0, then y ≥ 0).
inline RigidPose pose_from_keypoints(std::span<const Vec3> kps,
                                     const std::optional<Vec3>& prev_axis = std::nullopt) {
  if (kps.size() < 2) throw InputError("pose_from_keypoints: need at least 2 keypoints");
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : kps) {
    if (!p.allFinite()) throw InputError("pose_from_keypoints: non-finite keypoint");
    centroid += p;
  }
  centroid /= static_cast<double>(kps.size());

  Mat3 cov = Mat3::Zero();
  double scale = 0.0;
  for (const auto& p : kps) {
    const Vec3 d = p - centroid;
    cov += d * d.transpose();
    scale = std::max(scale, p.cwiseAbs().maxCoeff());
  }
  cov /= static_cast<double>(kps.size());

  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  const double top = es.eigenvalues()(2);
  const double floor = std::max(scale * scale, 1e-300) * 1e-24;
  if (!(top > floor)) throw InputError("degenerate keypoint set");

  Vec3 axis = es.eigenvectors().col(2).normalized();
  if (prev_axis) {
    if (axis.dot(*prev_axis) < 0.0) axis = -axis;
  } else {
    axis = detail::first_frame_sign(axis);
  }
  return RigidPose{detail::complete_frame(axis), centroid};
}

/// Sequential scan so the principal axis never flips sign between usable frames.
inline ToolTrajectory trajectory_from_keypoints(const ToolKeypoints& kps) {
  std::vector<std::optional<RigidPose>> poses(kps.frames.size());
  std::optional<Vec3> prev;
  for (std::size_t t = 0; t < kps.frames.size(); ++t) {
    if (kps.frames[t].size() < 2) continue;
    poses[t] = pose_from_keypoints(kps.frames[t], prev);
    prev = poses[t]->rotation.col(0);
  }
  return ToolTrajectory::from_poses(std::move(poses));
}

}  // namespace taff
