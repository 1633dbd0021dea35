#pragma once

// Shared domain types and the run configuration.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace taff {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat36 = Eigen::Matrix<double, 3, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

using PointId = std::int64_t;
using RgpId = std::int32_t;

/// Bad user input: malformed files, invalid configuration, unmet preconditions.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation produced a non-finite or otherwise unusable result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

// ---------------------------------------------------------------------------
// TrackedScene
// ---------------------------------------------------------------------------

struct TrackRecord {
  int frame = 0;
  PointId point_id = 0;
  Vec3 position = Vec3::Zero();
  std::optional<int> label;
};

/// Per-frame positions of identity-tracked points. Storage is dense
/// (frame-major); points missing from a frame are flagged absent.
class TrackedScene {
 public:
  TrackedScene() = default;

  int frame_count() const { return frame_count_; }
  std::size_t point_count() const { return ids_.size(); }
  double fps() const { return fps_; }

  /// Point ids in ascending order; the dense index of a point is its rank here.
  std::span<const PointId> ids() const { return ids_; }
  PointId id(std::size_t index) const { return ids_[index]; }

  std::optional<std::size_t> index_of(PointId id) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
    if (it == ids_.end() || *it != id) return std::nullopt;
    return static_cast<std::size_t>(it - ids_.begin());
  }

  bool present(int frame, std::size_t index) const { return present_[slot(frame, index)] != 0; }
  const Vec3& position(int frame, std::size_t index) const { return positions_[slot(frame, index)]; }
  std::optional<int> label(int frame, std::size_t index) const {
    const int l = labels_[slot(frame, index)];
    if (l == kNoLabel) return std::nullopt;
    return l;
  }

  bool has_labels() const { return has_labels_; }

  /// Builds a scene from flat records. Point ids are the union over all
  /// records. Throws InputError on duplicates, negative frames, non-finite
  /// positions or negative labels.
  static TrackedScene from_records(std::span<const TrackRecord> records, int frame_count = -1,
                                   double fps = 30.0);

  friend class SceneBuilder;

 private:
  static constexpr int kNoLabel = -1;

  std::size_t slot(int frame, std::size_t index) const {
    return static_cast<std::size_t>(frame) * ids_.size() + index;
  }

  int frame_count_ = 0;
  double fps_ = 30.0;
  bool has_labels_ = false;
  std::vector<PointId> ids_;
  std::vector<Vec3> positions_;
  std::vector<std::uint8_t> present_;
  std::vector<int> labels_;
};

/// Incremental construction of a TrackedScene with a fixed id set.
class SceneBuilder {
 public:
  SceneBuilder(int frame_count, std::vector<PointId> ids, double fps = 30.0) {
    if (frame_count < 1) throw InputError("scene needs at least one frame");
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
      throw InputError("duplicate point id");
    scene_.frame_count_ = frame_count;
    scene_.fps_ = fps;
    scene_.ids_ = std::move(ids);
    const std::size_t n = static_cast<std::size_t>(frame_count) * scene_.ids_.size();
    scene_.positions_.assign(n, Vec3::Zero());
    scene_.present_.assign(n, 0);
    scene_.labels_.assign(n, TrackedScene::kNoLabel);
  }

  std::size_t point_count() const { return scene_.ids_.size(); }

  void set(int frame, std::size_t index, const Vec3& p, std::optional<int> label = std::nullopt) {
    if (frame < 0 || frame >= scene_.frame_count_ || index >= scene_.ids_.size())
      throw InputError("scene write out of range");
    if (!p.allFinite())
      throw InputError("non-finite position for point " + std::to_string(scene_.ids_[index]) +
                       " at frame " + std::to_string(frame));
    if (label && *label < 0)
      throw InputError("labels must be non-negative integers");
    const std::size_t s = scene_.slot(frame, index);
    scene_.positions_[s] = p;
    scene_.present_[s] = 1;
    scene_.labels_[s] = label ? *label : TrackedScene::kNoLabel;
    if (label) scene_.has_labels_ = true;
  }

  bool is_set(int frame, std::size_t index) const {
    return scene_.present_[scene_.slot(frame, index)] != 0;
  }

  TrackedScene build() && { return std::move(scene_); }

 private:
  TrackedScene scene_;
};

inline TrackedScene TrackedScene::from_records(std::span<const TrackRecord> records,
                                               int frame_count, double fps) {
  std::vector<PointId> ids;
  ids.reserve(records.size());
  int max_frame = -1;
  for (const auto& r : records) {
    if (r.frame < 0) throw InputError("negative frame index");
    ids.push_back(r.point_id);
    max_frame = std::max(max_frame, r.frame);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (frame_count < 0) frame_count = max_frame + 1;
  if (frame_count < 1) throw InputError("tracks contain no frames");
  if (max_frame >= frame_count) throw InputError("frame index beyond frame count");

  SceneBuilder builder(frame_count, ids, fps);
  for (const auto& r : records) {
    const auto it = std::lower_bound(ids.begin(), ids.end(), r.point_id);
    const auto index = static_cast<std::size_t>(it - ids.begin());
    if (builder.is_set(r.frame, index))
      throw InputError("duplicate row for point " + std::to_string(r.point_id) + " at frame " +
                       std::to_string(r.frame));
    builder.set(r.frame, index, r.position, r.label);
  }
  return std::move(builder).build();
}

// ---------------------------------------------------------------------------
// Poses and twists
// ---------------------------------------------------------------------------

inline constexpr double kRotationTolerance = 1e-9;

inline bool is_rotation(const Mat3& r, double tol = kRotationTolerance) {
  if (!r.allFinite()) return false;
  const double ortho = (r.transpose() * r - Mat3::Identity()).norm();
  return ortho <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

/// Rigid end-effector pose: rotation and origin (meters).
struct RigidPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 origin = Vec3::Zero();

  /// Validating constructor; throws InputError if `r` is not a proper rotation.
  static RigidPose make(const Mat3& r, const Vec3& o) {
    if (!is_rotation(r)) throw InputError("pose rotation is not orthonormal with det +1");
    if (!o.allFinite()) throw InputError("pose origin is not finite");
    return RigidPose{r, o};
  }

  Vec3 apply(const Vec3& p) const { return rotation * p + origin; }

  /// this ∘ other
  RigidPose compose(const RigidPose& other) const {
    return RigidPose{rotation * other.rotation, rotation * other.origin + origin};
  }
};

/// Finite per-step rigid increment: translation v (m/step), rotation vector omega (rad/step).
struct Twist {
  Vec3 v = Vec3::Zero();
  Vec3 omega = Vec3::Zero();

  Vec6 stacked() const {
    Vec6 x;
    x << v, omega;
    return x;
  }
  bool is_zero() const { return v.isZero(0.0) && omega.isZero(0.0); }
};

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

enum class JacobianAt { kRaw, kSolved };
enum class PlyScore { kPacsSmooth, kPacs, kPas };

struct RunConfig {
  double r_cluster = 0.004;    // m
  bool auto_radius = false;    // derive r_cluster from the frame-0 bounding box
  int n_min = 8;
  double sigma = 0.002;        // m
  bool auto_sigma = false;     // sigma = r_cluster / 2
  int rest_window_tau = 10;    // frames
  int solver_iterations = 10;
  double alpha_hydro = 0.0;
  double alpha_devia = 1e-4;
  double clamp_percentile = 0.98;
  double eps_stiffness = 1e-6;
  double lambda_ema = 0.8;
  int pae_window = 5;          // frames
  double eps_motion = 1e-4;    // m
  double delta_norm = 1e-8;
  std::uint64_t seed = 0;

  JacobianAt jacobian_at = JacobianAt::kSolved;
  bool smooth_pas = false;
  bool export_normalized = false;
  int max_rgps = 0;            // 0 = unlimited
  PlyScore ply_score = PlyScore::kPacsSmooth;
};

/// Every violated bound, one message per field.
inline std::vector<std::string> config_violations(const RunConfig& c) {
  std::vector<std::string> out;
  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) out.push_back(std::string(name) + " must be positive");
  };
  auto nonneg = [&](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) out.push_back(std::string(name) + " must be non-negative");
  };
  if (!c.auto_radius) positive(c.r_cluster, "r_cluster");
  if (!c.auto_sigma) positive(c.sigma, "sigma");
  if (c.n_min < 1) out.push_back("n_min must be at least 1");
  if (c.rest_window_tau < 1) out.push_back("rest_window_tau must be at least 1");
  if (c.solver_iterations < 0) out.push_back("solver_iterations must be non-negative");
  nonneg(c.alpha_hydro, "alpha_hydro");
  nonneg(c.alpha_devia, "alpha_devia");
  if (!(c.clamp_percentile > 0.0 && c.clamp_percentile <= 1.0))
    out.push_back("clamp_percentile must lie in (0,1]");
  positive(c.eps_stiffness, "eps_stiffness");
  if (!(c.lambda_ema > 0.0 && c.lambda_ema < 1.0))
    out.push_back("lambda_ema must lie in open interval (0,1)");
  if (c.pae_window < 2) out.push_back("pae_window must be at least 2");
  positive(c.eps_motion, "eps_motion");
  positive(c.delta_norm, "delta_norm");
  if (c.max_rgps < 0) out.push_back("max_rgps must be non-negative");
  return out;
}

/// Returns `c` unchanged when valid; otherwise throws InputError listing every violation.
inline RunConfig validate_config(const RunConfig& c) {
  const auto v = config_violations(c);
  if (v.empty()) return c;
  std::string msg = v.front();
  for (std::size_t i = 1; i < v.size(); ++i) msg += "; " + v[i];
  throw InputError(msg);
}

}  // namespace taff
