#pragma once

// Compliance energy and score of rigid tool motions against the stiffness
// metric, EMA smoothing, and the covariance-based co-motion baseline.

#include "tissue_affordance/analysis.hpp"
#include "tissue_affordance/kinematics.hpp"

#include <limits>
#include <string_view>

namespace taff {

inline double compliance_energy(const Vec3& dp, const StiffnessMetric& k) {
  return 0.5 * dp.dot(k.K * dp);
}

inline double pacs(double energy) { return -energy; }

inline double ema_update(double prev, double cur, double lambda) {
  return lambda * prev + (1.0 - lambda) * cur;
}

struct TrajectoryWindowStats {
  Vec3 mean = Vec3::Zero();
  Mat3 covariance = Mat3::Zero();
  int count = 0;
};

// Forward window of transitions k = frame .. frame+window-1; a transition is
// used only when the point is present at both k and k+1.
inline std::optional<TrajectoryWindowStats> trajectory_covariance(const TrackedScene& scene,
                                                                  std::size_t point, int frame,
                                                                  int window) {
  std::vector<Vec3> u;
  const int last = std::min(frame + window - 1, scene.frame_count() - 2);
  for (int k = std::max(frame, 0); k <= last; ++k) {
    if (scene.present(k, point) && scene.present(k + 1, point))
      u.push_back(scene.position(k + 1, point) - scene.position(k, point));
  }
  if (u.size() < 2) return std::nullopt;
  TrajectoryWindowStats s;
  s.count = static_cast<int>(u.size());
  for (const auto& x : u) s.mean += x;
  s.mean /= s.count;
  for (const auto& x : u) {
    const Vec3 d = x - s.mean;
    s.covariance += d * d.transpose();
  }
  s.covariance /= s.count;
  s.covariance = 0.5 * (s.covariance + s.covariance.transpose());
  return s;
}

struct PositionalAgreement {
  double pae = 0.0;
  double pas = 0.0;
};

inline PositionalAgreement positional_agreement(const TrajectoryWindowStats& stats, const Vec3& d_a) {
  if (std::abs(d_a.norm() - 1.0) > 1e-9) throw InputError("action direction must be unit length");
  const double e = d_a.dot(stats.covariance * d_a);
  return {e, -e};
}

inline std::optional<Vec3> action_direction(const Twist& xi, double eps_motion) {
  const double n = xi.v.norm();
  if (!(n >= eps_motion) || n == 0.0) return std::nullopt;
  return Vec3(xi.v / n);
}

struct AffordanceEntry {
  int frame = 0;
  RgpId rgp_id = 0;
  Vec3 position = Vec3::Zero();
  bool valid = false;            // PACE/PACS defined
  std::string reason;            // '|'-joined codes; empty when fully valid
  Vec3 displacement = Vec3::Zero();
  double pace = 0.0;
  double pacs = 0.0;
  std::optional<double> pace_smooth;
  std::optional<double> pacs_smooth;
  std::optional<double> pae;
  std::optional<double> pas;
  double eig_min = 0.0;
  double eig_max = 0.0;
  Vec3 compliant = Vec3::Zero();
  std::optional<double> pacs_norm;
};

struct AffordanceField {
  int frame_count = 0;
  std::size_t rgp_count = 0;
  std::vector<AffordanceEntry> entries;  // frame-major, then RGP order

  const AffordanceEntry& at(int frame, std::size_t rgp) const {
    return entries[static_cast<std::size_t>(frame) * rgp_count + rgp];
  }
};

namespace detail {

inline void add_reason(std::string& r, std::string_view code) {
  if (!r.empty()) r += '|';
  r += code;
}

}  // namespace detail

inline AffordanceField compute_affordance_field(const TrackedScene& scene, const SceneAnalysis& a,
                                                const ToolTrajectory& tool) {
  const RunConfig& cfg = a.cfg;
  AffordanceField f;
  f.frame_count = a.frame_count;
  f.rgp_count = a.rgp_count();
  f.entries.resize(static_cast<std::size_t>(f.frame_count) * f.rgp_count);

  std::vector<std::optional<Twist>> twist(static_cast<std::size_t>(std::max(f.frame_count, 0)));
  for (int t = 0; t + 1 < f.frame_count; ++t) {
    if (static_cast<std::size_t>(t) < tool.twists.size()) twist[static_cast<std::size_t>(t)] = tool.twists[static_cast<std::size_t>(t)];
  }

  parallel_for(f.rgp_count, [&](std::size_t r) {
    const Rgp& rgp = a.rgps.rgps[r];
    std::optional<double> ema_e, ema_pae;
    for (int t = 0; t < f.frame_count; ++t) {
      const RgpFrameState& st = a.at(t, r);
      AffordanceEntry& e = f.entries[static_cast<std::size_t>(t) * f.rgp_count + r];
      e.frame = t;
      e.rgp_id = rgp.rgp_id;
      e.position = st.position;
      if (st.active) {
        e.eig_min = st.stiffness.eigenvalues(0);
        e.eig_max = st.stiffness.eigenvalues(2);
        e.compliant = st.compliant.direction;
      }

      if (t + 1 >= f.frame_count) {
        detail::add_reason(e.reason, "no_transition");
        continue;
      }
      if (!st.active) {
        detail::add_reason(e.reason, "rgp_inactive:" + st.reason);
        continue;
      }
      const auto& xi = twist[static_cast<std::size_t>(t)];
      const bool has_pose = static_cast<std::size_t>(t) < tool.poses.size() && tool.poses[static_cast<std::size_t>(t)];
      if (!xi || !has_pose) {
        detail::add_reason(e.reason, "no_tool_pose");
        continue;
      }

      e.displacement = induced_displacement(*xi, st.position, tool.poses[static_cast<std::size_t>(t)]->origin);
      e.pace = compliance_energy(e.displacement, st.stiffness);
      e.pacs = pacs(e.pace);
      e.valid = true;
      ema_e = ema_e ? ema_update(*ema_e, e.pace, cfg.lambda_ema) : e.pace;
      e.pace_smooth = *ema_e;
      e.pacs_smooth = pacs(*ema_e);

      const auto d_a = action_direction(*xi, cfg.eps_motion);
      const auto stats = trajectory_covariance(scene, rgp.anchor_index, t, cfg.pae_window);
      if (!d_a) detail::add_reason(e.reason, "undefined_action_direction");
      if (!stats) detail::add_reason(e.reason, "insufficient_window");
      if (d_a && stats) {
        double pae = positional_agreement(*stats, *d_a).pae;
        if (cfg.smooth_pas) {
          ema_pae = ema_pae ? ema_update(*ema_pae, pae, cfg.lambda_ema) : pae;
          pae = *ema_pae;
        }
        e.pae = pae;
        e.pas = -pae;
      }
    }
  });

  if (cfg.export_normalized) {
    for (int t = 0; t < f.frame_count; ++t) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t r = 0; r < f.rgp_count; ++r) {
        const auto& e = f.at(t, r);
        if (!e.valid) continue;
        lo = std::min(lo, e.pacs);
        hi = std::max(hi, e.pacs);
      }
      for (std::size_t r = 0; r < f.rgp_count; ++r) {
        auto& e = f.entries[static_cast<std::size_t>(t) * f.rgp_count + r];
        if (!e.valid) continue;
        e.pacs_norm = hi > lo ? (e.pacs - lo) / (hi - lo) : 0.0;
      }
    }
  }
  return f;
}

}  // namespace taff
