#pragma once

// Representative geometry point (RGP) selection, time-varying neighborhoods,
// segmentation-aware filtering and smoothed rest states.

#include "tissue_affordance/core.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <unordered_map>

namespace taff {

// ---------------------------------------------------------------------------
// Spatial index
// ---------------------------------------------------------------------------

/// Uniform hash grid over the present points of one frame. Queries return
/// exactly the points satisfying ‖p − c‖ ≤ radius, sorted by point index.
class FrameIndex {
 public:
  FrameIndex(const TrackedScene& scene, int frame, double cell_size)
      : scene_(&scene), frame_(frame), cell_(cell_size) {
    if (!(cell_size > 0.0)) throw InputError("FrameIndex: cell size must be positive");
    for (std::size_t i = 0; i < scene.point_count(); ++i) {
      if (!scene.present(frame, i)) continue;
      cells_[key(cell_of(scene.position(frame, i)))].push_back(static_cast<std::uint32_t>(i));
    }
  }

  int frame() const { return frame_; }

  std::vector<std::size_t> query(const Vec3& center, double radius) const {
    std::vector<std::size_t> out;
    const auto lo = cell_of(center - Vec3::Constant(radius));
    const auto hi = cell_of(center + Vec3::Constant(radius));
    const double r2 = radius * radius;
    for (auto x = lo[0]; x <= hi[0]; ++x)
      for (auto y = lo[1]; y <= hi[1]; ++y)
        for (auto z = lo[2]; z <= hi[2]; ++z) {
          auto it = cells_.find(key({x, y, z}));
          if (it == cells_.end()) continue;
          for (auto i : it->second) {
            if ((scene_->position(frame_, i) - center).squaredNorm() <= r2) out.push_back(i);
          }
        }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  using Cell = std::array<std::int64_t, 3>;

  Cell cell_of(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / cell_)),
            static_cast<std::int64_t>(std::floor(p.y() / cell_)),
            static_cast<std::int64_t>(std::floor(p.z() / cell_))};
  }
  static std::uint64_t key(const Cell& c) {
    // 21 bits per axis is plenty for any scene with a sane cell size.
    auto part = [](std::int64_t v) { return static_cast<std::uint64_t>(v) & 0x1FFFFFu; };
    return (part(c[0]) << 42) | (part(c[1]) << 21) | part(c[2]);
  }

  const TrackedScene* scene_;
  int frame_;
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells_;
};

/// Reference radius predicate used to check FrameIndex.
inline std::vector<std::size_t> radius_query_exhaustive(const TrackedScene& scene, int frame,
                                                        const Vec3& center, double radius) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < scene.point_count(); ++i) {
    if (scene.present(frame, i) && (scene.position(frame, i) - center).squaredNorm() <= radius * radius)
      out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rest states
// ---------------------------------------------------------------------------

struct RestState {
  PointId point_id = 0;
  Vec3 rest_position = Vec3::Zero();
  int first_frame = 0;  // t_appr
  int samples = 0;
};

/// Rest states indexed by dense point index; absent entries are points never
/// present inside their window.
using RestStateMap = std::vector<std::optional<RestState>>;

/// Mean of each point's present positions over [t_appr, t_appr + τ − 1], with
/// t_appr the point's first frame of presence.
inline RestStateMap compute_rest_states(const TrackedScene& scene, const RunConfig& cfg) {
  if (cfg.rest_window_tau < 1) throw InputError("rest_window_tau must be at least 1");
  RestStateMap out(scene.point_count());
  for (std::size_t i = 0; i < scene.point_count(); ++i) {
    int first = -1;
    for (int t = 0; t < scene.frame_count(); ++t) {
      if (scene.present(t, i)) {
        first = t;
        break;
      }
    }
    if (first < 0) continue;
    const int last = std::min(scene.frame_count() - 1, first + cfg.rest_window_tau - 1);
    Vec3 sum = Vec3::Zero();
    int n = 0;
    for (int t = first; t <= last; ++t) {
      if (!scene.present(t, i)) continue;
      sum += scene.position(t, i);
      ++n;
    }
    out[i] = RestState{scene.id(i), sum / static_cast<double>(n), first, n};
  }
  return out;
}

// ---------------------------------------------------------------------------
// RGP selection
// ---------------------------------------------------------------------------

struct Rgp {
  RgpId rgp_id = 0;
  std::size_t anchor_index = 0;
  PointId anchor_point_id = 0;
  std::optional<int> label_at_selection;
  Vec3 position0 = Vec3::Zero();
};

struct RgpSet {
  std::vector<Rgp> rgps;
  std::vector<std::string> warnings;

  std::size_t size() const { return rgps.size(); }
  bool empty() const { return rgps.empty(); }
};

/// Frame-0 present points in farthest-point order, seeded at the lowest point id.
/// Ties on the max-min distance resolve to the lower point id.
inline std::vector<std::size_t> farthest_point_order(const TrackedScene& scene, int frame = 0) {
  std::vector<std::size_t> pts;
  for (std::size_t i = 0; i < scene.point_count(); ++i)
    if (scene.present(frame, i)) pts.push_back(i);
  std::vector<std::size_t> order;
  if (pts.empty()) return order;
  order.reserve(pts.size());
  std::vector<double> mind(pts.size(), std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> taken(pts.size(), 0);
  std::size_t cur = 0;
  for (std::size_t step = 0; step < pts.size(); ++step) {
    taken[cur] = 1;
    order.push_back(pts[cur]);
    const Vec3& pc = scene.position(frame, pts[cur]);
    std::size_t best = pts.size();
    double best_d = -1.0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (taken[k]) continue;
      mind[k] = std::min(mind[k], (scene.position(frame, pts[k]) - pc).squaredNorm());
      if (mind[k] > best_d) {
        best_d = mind[k];
        best = k;
      }
    }
    if (best == pts.size()) break;
    cur = best;
  }
  return order;
}

/// Farthest-point ordering over frame 0; a candidate becomes an RGP when it has at
/// least n_min present neighbors within r_cluster (itself excluded) and lies farther
/// than r_cluster from every accepted RGP.
inline RgpSet select_rgps(const TrackedScene& scene, const RunConfig& cfg) {
  if (scene.frame_count() < 1) throw InputError("select_rgps: empty scene");
  const auto order = farthest_point_order(scene, 0);
  if (order.empty()) throw InputError("select_rgps: frame 0 has no present points");

  const double r = cfg.r_cluster;
  const FrameIndex index(scene, 0, r);
  RgpSet out;
  for (auto i : order) {
    const Vec3& p = scene.position(0, i);
    bool separated = true;
    for (const auto& a : out.rgps) {
      if ((a.position0 - p).norm() <= r) {
        separated = false;
        break;
      }
    }
    if (!separated) continue;
    const auto nb = index.query(p, r);
    const auto neighbors = static_cast<int>(nb.size()) - 1;  // minus the candidate itself
    if (neighbors < cfg.n_min) continue;
    Rgp rgp;
    rgp.rgp_id = static_cast<RgpId>(out.rgps.size());
    rgp.anchor_index = i;
    rgp.anchor_point_id = scene.id(i);
    rgp.label_at_selection = scene.label(0, i);
    rgp.position0 = p;
    out.rgps.push_back(rgp);
    if (cfg.max_rgps > 0 && static_cast<int>(out.rgps.size()) >= cfg.max_rgps) break;
  }
  if (out.rgps.empty())
    out.warnings.push_back("no point passes the density test (n_min=" + std::to_string(cfg.n_min) +
                           ", r_cluster=" + std::to_string(r) + ")");
  return out;
}

// ---------------------------------------------------------------------------
// Neighborhoods
// ---------------------------------------------------------------------------

struct Neighborhood {
  RgpId rgp_id = 0;
  int frame = 0;
  bool active = false;
  bool unfiltered = false;   // segmentation filter skipped (no anchor label)
  std::string inactive_reason;
  std::size_t anchor_index = 0;
  Vec3 anchor_position = Vec3::Zero();
  Vec3 anchor_rest = Vec3::Zero();
  std::vector<std::size_t> member_indices;
  std::vector<PointId> member_point_ids;
  std::vector<Vec3> offsets_current;  // p_j(t) − p_i(t)
  std::vector<Vec3> offsets_rest;     // p̄_j − p̄_i
  std::vector<double> weights;        // exp(−‖rest offset‖²/σ²)

  std::size_t size() const { return member_indices.size(); }
};

namespace detail {

inline Neighborhood neighborhood_from_candidates(const TrackedScene& scene, const Rgp& rgp,
                                                 int frame, const RunConfig& cfg,
                                                 const RestStateMap& rest,
                                                 const std::vector<std::size_t>& candidates) {
  Neighborhood n;
  n.rgp_id = rgp.rgp_id;
  n.frame = frame;
  n.anchor_index = rgp.anchor_index;
  n.anchor_position = scene.position(frame, rgp.anchor_index);
  n.anchor_rest = rest[rgp.anchor_index]->rest_position;
  n.active = true;
  const double inv_s2 = 1.0 / (cfg.sigma * cfg.sigma);
  for (auto j : candidates) {
    if (j == rgp.anchor_index || !rest[j]) continue;
    const Vec3 rest_off = rest[j]->rest_position - n.anchor_rest;
    n.member_indices.push_back(j);
    n.member_point_ids.push_back(scene.id(j));
    n.offsets_current.push_back(scene.position(frame, j) - n.anchor_position);
    n.offsets_rest.push_back(rest_off);
    n.weights.push_back(std::exp(-rest_off.squaredNorm() * inv_s2));
  }
  return n;
}

inline std::optional<Neighborhood> inactive_neighborhood(const TrackedScene& scene, const Rgp& rgp,
                                                         int frame, const RestStateMap& rest) {
  if (frame < 0 || frame >= scene.frame_count()) throw InputError("frame out of range");
  Neighborhood n;
  n.rgp_id = rgp.rgp_id;
  n.frame = frame;
  n.anchor_index = rgp.anchor_index;
  if (!scene.present(frame, rgp.anchor_index)) {
    n.inactive_reason = "anchor_absent";
    return n;
  }
  if (!rest[rgp.anchor_index]) {
    n.inactive_reason = "anchor_without_rest_state";
    return n;
  }
  return std::nullopt;
}

}  // namespace detail

/// Members are the present points within r_cluster of the anchor's current
/// position (anchor excluded). Inactive when the anchor is absent at `frame`.
inline Neighborhood build_neighborhood(const TrackedScene& scene, const Rgp& rgp, int frame,
                                       const RunConfig& cfg, const RestStateMap& rest) {
  if (auto bad = detail::inactive_neighborhood(scene, rgp, frame, rest)) return *bad;
  const auto cand =
      radius_query_exhaustive(scene, frame, scene.position(frame, rgp.anchor_index), cfg.r_cluster);
  return detail::neighborhood_from_candidates(scene, rgp, frame, cfg, rest, cand);
}

/// Same contract, with candidates from a prebuilt index of `frame`.
inline Neighborhood build_neighborhood(const TrackedScene& scene, const FrameIndex& index,
                                       const Rgp& rgp, const RunConfig& cfg,
                                       const RestStateMap& rest) {
  const int frame = index.frame();
  if (auto bad = detail::inactive_neighborhood(scene, rgp, frame, rest)) return *bad;
  const auto cand = index.query(scene.position(frame, rgp.anchor_index), cfg.r_cluster);
  return detail::neighborhood_from_candidates(scene, rgp, frame, cfg, rest, cand);
}

/// Keeps members whose label at `frame` equals the anchor's. Weights are not
/// renormalized. Without an anchor label the input is returned flagged unfiltered.
inline Neighborhood filter_by_segmentation(const Neighborhood& nbh, const TrackedScene& scene,
                                           int frame) {
  if (!nbh.active) return nbh;
  const auto anchor_label = scene.label(frame, nbh.anchor_index);
  if (!anchor_label) {
    Neighborhood out = nbh;
    out.unfiltered = true;
    return out;
  }
  Neighborhood out = nbh;
  out.member_indices.clear();
  out.member_point_ids.clear();
  out.offsets_current.clear();
  out.offsets_rest.clear();
  out.weights.clear();
  for (std::size_t k = 0; k < nbh.size(); ++k) {
    const auto l = scene.label(frame, nbh.member_indices[k]);
    if (!l || *l != *anchor_label) continue;
    out.member_indices.push_back(nbh.member_indices[k]);
    out.member_point_ids.push_back(nbh.member_point_ids[k]);
    out.offsets_current.push_back(nbh.offsets_current[k]);
    out.offsets_rest.push_back(nbh.offsets_rest[k]);
    out.weights.push_back(nbh.weights[k]);
  }
  return out;
}

/// Applies the scale defaults: r_cluster = 2% of the frame-0 bounding-box
/// diagonal when auto_radius is set, σ = r_cluster / 2 when auto_sigma is set.
inline RunConfig resolve_auto_radius(const RunConfig& cfg, const TrackedScene& scene) {
  if (!cfg.auto_radius) {
    RunConfig out = cfg;
    if (cfg.auto_sigma) out.sigma = 0.5 * cfg.r_cluster;
    out.auto_sigma = false;
    return out;
  }
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  bool any = false;
  for (std::size_t i = 0; i < scene.point_count(); ++i) {
    if (!scene.present(0, i)) continue;
    lo = lo.cwiseMin(scene.position(0, i));
    hi = hi.cwiseMax(scene.position(0, i));
    any = true;
  }
  if (!any) throw InputError("cannot derive r_cluster: frame 0 has no present points");
  RunConfig out = cfg;
  out.r_cluster = 0.02 * (hi - lo).norm();
  if (!(out.r_cluster > 0.0)) throw InputError("cannot derive r_cluster: frame 0 is a single point");
  if (cfg.auto_sigma) out.sigma = 0.5 * out.r_cluster;
  out.auto_radius = false;
  out.auto_sigma = false;
  return out;
}

}  // namespace taff
