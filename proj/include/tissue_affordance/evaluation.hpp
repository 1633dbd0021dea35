#pragma once

// Stiffness validation: compliant direction vs. next-step observed motion,
// the velocity-persistence baseline and the solver-iteration sweep.

#include "tissue_affordance/analysis.hpp"

namespace taff {

inline double median(std::vector<double> v) {
  if (v.empty()) throw InputError("median of empty sample");
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

/// Ranks starting at 1; ties share their average rank.
inline std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> rank(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

/// Spearman rank correlation; absent when either side is constant or n < 2.
inline std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("spearman: size mismatch");
  if (x.size() < 2) return std::nullopt;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

/// An optional direction with the reason it is missing.
struct DirectionSample {
  std::optional<Vec3> direction;
  std::string reason;
};

/// Unit direction of x(t+1) − x(t): v/(‖v‖ + δ), re-normalized; excluded when ‖v‖ < eps_motion.
inline DirectionSample observed_direction(const TrackedScene& scene, std::size_t point, int frame,
                                          double eps_motion, double delta) {
  if (frame < 0 || frame + 1 >= scene.frame_count()) return {std::nullopt, "no_next_frame"};
  if (!scene.present(frame, point) || !scene.present(frame + 1, point))
    return {std::nullopt, "point_absent"};
  const Vec3 v = scene.position(frame + 1, point) - scene.position(frame, point);
  const double n = v.norm();
  if (n < eps_motion) return {std::nullopt, "below_motion_threshold"};
  const Vec3 u = v / (n + delta);
  return {u.normalized(), ""};
}

/// |e·u|: eigenvector signs carry no meaning.
inline double compliant_alignment(const Vec3& e_min, const Vec3& u) {
  return std::min(1.0, std::abs(e_min.dot(u)));
}

/// Signed cosine between the previous and the current observed motion directions.
inline std::optional<double> velocity_persistence_baseline(const TrackedScene& scene,
                                                           std::size_t point, int frame,
                                                           double eps_motion, double delta) {
  if (frame < 1) return std::nullopt;
  const auto prev = observed_direction(scene, point, frame - 1, eps_motion, delta);
  const auto cur = observed_direction(scene, point, frame, eps_motion, delta);
  if (!prev.direction || !cur.direction) return std::nullopt;
  return std::clamp(prev.direction->dot(*cur.direction), -1.0, 1.0);
}

struct ValidationSample {
  int frame = 0;
  RgpId rgp_id = 0;
  bool excluded = true;
  std::string reason;
  double cos_compliant = 0.0;
  std::optional<double> cos_baseline;
  bool degenerate = false;
};

/// One entry per (frame, RGP), frame-major. A pair is a sample when the RGP is
/// active at t and its anchor moves at least eps_motion from t to t+1.
inline std::vector<ValidationSample> validation_samples(const TrackedScene& scene,
                                                        const SceneAnalysis& a) {
  std::vector<ValidationSample> out;
  out.reserve(a.states.size());
  for (int t = 0; t < a.frame_count; ++t) {
    for (std::size_t r = 0; r < a.rgp_count(); ++r) {
      const auto& rgp = a.rgps.rgps[r];
      const auto& st = a.at(t, r);
      ValidationSample s;
      s.frame = t;
      s.rgp_id = rgp.rgp_id;
      if (!st.active) {
        s.reason = "rgp_inactive:" + st.reason;
        out.push_back(s);
        continue;
      }
      const auto u = observed_direction(scene, rgp.anchor_index, t, a.cfg.eps_motion, a.cfg.delta_norm);
      if (!u.direction) {
        s.reason = u.reason;
        out.push_back(s);
        continue;
      }
      s.excluded = false;
      s.cos_compliant = compliant_alignment(st.compliant.direction, *u.direction);
      s.degenerate = st.compliant.degenerate;
      s.cos_baseline = velocity_persistence_baseline(scene, rgp.anchor_index, t, a.cfg.eps_motion,
                                                     a.cfg.delta_norm);
      out.push_back(s);
    }
  }
  return out;
}

struct ValidationSummary {
  double median_cos_compliant = 0.0;
  double median_cos_baseline = 0.0;
  std::size_t n_samples = 0;  // samples where both cosines are defined
};

/// Medians over the samples where both predictors are defined, so both medians
/// are taken over the same set.
inline ValidationSummary summarize_validation(std::span<const ValidationSample> samples) {
  std::vector<double> comp, base;
  for (const auto& s : samples) {
    if (s.excluded || !s.cos_baseline) continue;
    comp.push_back(s.cos_compliant);
    base.push_back(*s.cos_baseline);
  }
  if (comp.empty()) throw InputError("no valid validation samples");
  return {median(comp), median(base), comp.size()};
}

struct SweepRow {
  int iterations = 0;
  double median_cos_compliant = 0.0;
  double median_cos_baseline = 0.0;
  std::size_t n_samples = 0;
};

/// Re-runs solver and stiffness for each iteration count with RGPs and rest
/// states held fixed. `samples_out`, when given, receives every run's samples.
inline std::vector<SweepRow> iteration_sweep(
    const TrackedScene& scene, std::span<const int> iteration_list, const RunConfig& cfg_in,
    std::vector<std::vector<ValidationSample>>* samples_out = nullptr) {
  if (iteration_list.empty()) throw InputError("iteration list is empty");
  for (std::size_t i = 0; i < iteration_list.size(); ++i) {
    if (iteration_list[i] < 0) throw InputError("iteration counts must be non-negative");
    if (i > 0 && iteration_list[i] <= iteration_list[i - 1])
      throw InputError("iteration list must be strictly ascending");
  }
  const RunConfig cfg = validate_config(resolve_auto_radius(cfg_in, scene));
  const auto rest = compute_rest_states(scene, cfg);
  const auto rgps = select_rgps(scene, cfg);
  std::vector<SweepRow> rows;
  for (int iters : iteration_list) {
    RunConfig c = cfg;
    c.solver_iterations = iters;
    const auto a = analyze_frames(scene, rgps, rest, c);
    auto samples = validation_samples(scene, a);
    const auto sum = summarize_validation(samples);
    rows.push_back({iters, sum.median_cos_compliant, sum.median_cos_baseline, sum.n_samples});
    if (samples_out) samples_out->push_back(std::move(samples));
  }
  return rows;
}

}  // namespace taff
