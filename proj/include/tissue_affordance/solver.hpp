#pragma once

// Weighted least-squares deformation gradients, hydrostatic/deviatoric
// constraints and the quasi-static Gauss–Seidel XPBD corrector.

#include "tissue_affordance/geometry.hpp"

#include <cmath>
#include <limits>

namespace taff {

/// det(F)·F⁻ᵀ, written with cross products so it stays finite for singular F.
inline Mat3 cofactor(const Mat3& f) {
  Mat3 c;
  c.col(0) = f.col(1).cross(f.col(2));
  c.col(1) = f.col(2).cross(f.col(0));
  c.col(2) = f.col(0).cross(f.col(1));
  return c;
}

// ---------------------------------------------------------------------------
// Deformation gradient
// ---------------------------------------------------------------------------

inline constexpr double kMomentDegeneracyRatio = 1e-12;
inline constexpr double kTikhonovEta = 1e-6;

struct DeformationGradient {
  Mat3 F = Mat3::Identity();
  Mat3 moment = Mat3::Zero();          // A = Σ w Q Qᵀ as measured
  Mat3 moment_inverse = Mat3::Zero();  // inverse of the matrix actually used (regularized if flagged)
  double condition_estimate = 1.0;     // of the matrix actually used
  bool low_confidence = false;         // Tikhonov fallback applied
};

/// F = B A⁻¹ for the given current offsets, with A⁻¹ already known.
inline Mat3 deformation_from_offsets(std::span<const Vec3> current, std::span<const Vec3> rest,
                                     std::span<const double> weights, const Mat3& moment_inverse) {
  Mat3 b = Mat3::Zero();
  for (std::size_t j = 0; j < current.size(); ++j) b.noalias() += weights[j] * current[j] * rest[j].transpose();
  return b * moment_inverse;
}

inline Mat3 rest_moment(const Neighborhood& nbh) {
  Mat3 a = Mat3::Zero();
  for (std::size_t j = 0; j < nbh.size(); ++j)
    a.noalias() += nbh.weights[j] * nbh.offsets_rest[j] * nbh.offsets_rest[j].transpose();
  return a;
}

/// Closed-form weighted least-squares fit of current offsets against rest offsets.
/// Ill-conditioned moment matrices (λ_min < 1e-12·λ_max) get A + η·tr(A)/3·I and
/// the result is flagged low-confidence.
inline DeformationGradient estimate_deformation_gradient(const Neighborhood& nbh) {
  if (nbh.size() == 0) throw NumericalError("estimate_deformation_gradient: empty neighborhood");
  DeformationGradient out;
  out.moment = rest_moment(nbh);
  Eigen::SelfAdjointEigenSolver<Mat3> es(out.moment, Eigen::EigenvaluesOnly);
  double lo = es.eigenvalues()(0);
  double hi = es.eigenvalues()(2);
  if (!(hi > 0.0)) throw NumericalError("estimate_deformation_gradient: zero moment matrix");
  Mat3 used = out.moment;
  if (lo < kMomentDegeneracyRatio * hi || nbh.size() < 3) {
    const double mu = kTikhonovEta * out.moment.trace() / 3.0;
    used += mu * Mat3::Identity();
    lo = std::max(lo, 0.0) + mu;
    hi += mu;
    out.low_confidence = true;
  }
  out.moment_inverse = used.inverse();
  out.condition_estimate = std::max(1.0, hi / lo);
  out.F = deformation_from_offsets(nbh.offsets_current, nbh.offsets_rest, nbh.weights,
                                   out.moment_inverse);
  if (!out.F.allFinite()) throw NumericalError("estimate_deformation_gradient: non-finite F");
  return out;
}

// ---------------------------------------------------------------------------
// Constraints
// ---------------------------------------------------------------------------

struct ConstraintResiduals {
  double c_hydro = 0.0;
  double c_devia = 0.0;

  double total_abs() const { return std::abs(c_hydro) + std::abs(c_devia); }
};

/// det(F) − 1
inline double hydrostatic_constraint(const Mat3& f) { return f.determinant() - 1.0; }

/// tr(FᵀF) − 3
inline double deviatoric_constraint(const Mat3& f) { return f.squaredNorm() - 3.0; }

inline ConstraintResiduals constraint_residuals(const Mat3& f) {
  return {hydrostatic_constraint(f), deviatoric_constraint(f)};
}

struct ConstraintGradients {
  std::vector<Vec3> hydro;  // ∇_{p_j} C_hydro per member
  std::vector<Vec3> devia;  // ∇_{p_j} C_devia per member
};

namespace detail {

// Per-member gradients for a constraint whose F-derivative is `dc_df`:
// ∇_{p_j} C = w_j · dC/dF · A⁻¹ Q_j.
inline void member_gradients(const Mat3& dc_df, const Mat3& moment_inverse,
                             std::span<const Vec3> rest, std::span<const double> weights,
                             std::vector<Vec3>& out) {
  out.resize(rest.size());
  const Mat3 m = dc_df * moment_inverse;
  for (std::size_t j = 0; j < rest.size(); ++j) out[j] = weights[j] * (m * rest[j]);
}

}  // namespace detail

/// Analytic gradients of both constraints w.r.t. each member position, by the
/// chain rule through F = B A⁻¹ (∂F/∂(p_j)_k = w_j e_k Q_jᵀ A⁻¹).
inline ConstraintGradients constraint_gradients(const Neighborhood& nbh,
                                                const DeformationGradient& dg) {
  ConstraintGradients g;
  detail::member_gradients(cofactor(dg.F), dg.moment_inverse, nbh.offsets_rest, nbh.weights, g.hydro);
  detail::member_gradients(2.0 * dg.F, dg.moment_inverse, nbh.offsets_rest, nbh.weights, g.devia);
  return g;
}

// ---------------------------------------------------------------------------
// Adaptive clamping
// ---------------------------------------------------------------------------

/// Nearest-rank quantile of the magnitudes: the ⌈p·n⌉-th smallest.
inline double nearest_rank_magnitude(std::span<const Vec3> v, double percentile) {
  if (v.empty()) throw InputError("nearest_rank_magnitude: empty list");
  std::vector<double> mags(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) mags[i] = v[i].norm();
  const auto n = static_cast<double>(mags.size());
  auto rank = static_cast<std::size_t>(std::ceil(percentile * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, mags.size());
  std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(rank - 1), mags.end());
  return mags[rank - 1];
}

/// Rescales every correction longer than the nearest-rank percentile magnitude
/// down to that magnitude, keeping its direction.
inline std::vector<Vec3> adaptive_clamp(std::span<const Vec3> corrections, double percentile) {
  std::vector<Vec3> out(corrections.begin(), corrections.end());
  if (out.empty()) throw InputError("adaptive_clamp: empty list");
  const double cap = nearest_rank_magnitude(out, percentile);
  for (auto& c : out) {
    const double m = c.norm();
    if (m > cap) c *= cap / m;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quasi-static XPBD
// ---------------------------------------------------------------------------

/// Outcome of one RGP's solve for one frame.
struct RgpSolve {
  RgpId rgp_id = 0;
  std::vector<Vec3> offsets;              // corrected neighbor offsets (anchor fixed)
  double lambda_hydro = 0.0;
  double lambda_devia = 0.0;
  int iterations = 0;
  std::vector<double> residual_history;   // |C_hydro| + |C_devia|; [0] before the first pass
  std::vector<double> correction_history; // Σ‖Δp‖ applied per pass
  bool failed = false;                    // non-finite correction; offsets are the pre-solve ones
  bool skipped_update = false;            // some projection had a vanishing gradient
};

struct SolverState {
  std::vector<RgpSolve> rgps;
};

namespace detail {

inline double gradient_reference(const Mat3& moment_inverse, std::span<const Vec3> rest,
                                 std::span<const double> weights) {
  double s = 0.0;
  for (std::size_t j = 0; j < rest.size(); ++j)
    s += weights[j] * weights[j] * (moment_inverse * rest[j]).squaredNorm();
  return s;
}

}  // namespace detail

/// Gauss–Seidel XPBD on a copy of the neighborhood: every pass projects the
/// hydrostatic then the deviatoric constraint with unit masses and
/// Δλ = (−C − αλ)/(Σ‖∇C‖² + α), clamping each projection's corrections at the
/// configured percentile. Multipliers start at zero.
inline RgpSolve solve_rgp(const Neighborhood& nbh, const DeformationGradient& dg,
                          const RunConfig& cfg) {
  RgpSolve out;
  out.rgp_id = nbh.rgp_id;
  out.offsets = nbh.offsets_current;
  const auto& rest = nbh.offsets_rest;
  const auto& w = nbh.weights;
  const Mat3& ainv = dg.moment_inverse;

  std::vector<Vec3> q = nbh.offsets_current;
  std::vector<Vec3> grad;
  std::vector<Vec3> corr(q.size());
  const double ref = detail::gradient_reference(ainv, rest, w);
  const double vanishing = 1e-12 * ref;

  auto residual = [&]() { return constraint_residuals(deformation_from_offsets(q, rest, w, ainv)); };
  out.residual_history.push_back(residual().total_abs());

  double lambda[2] = {0.0, 0.0};
  const double alpha[2] = {cfg.alpha_hydro, cfg.alpha_devia};

  for (int pass = 0; pass < cfg.solver_iterations; ++pass) {
    double moved = 0.0;
    for (int c = 0; c < 2; ++c) {
      const Mat3 f = deformation_from_offsets(q, rest, w, ainv);
      const double cval = c == 0 ? hydrostatic_constraint(f) : deviatoric_constraint(f);
      detail::member_gradients(c == 0 ? cofactor(f) : Mat3(2.0 * f), ainv, rest, w, grad);
      double g2 = 0.0;
      for (const auto& g : grad) g2 += g.squaredNorm();
      if (!(g2 > vanishing) && alpha[c] == 0.0) {
        out.skipped_update = true;
        continue;
      }
      const double dl = (-cval - alpha[c] * lambda[c]) / (g2 + alpha[c]);
      if (!std::isfinite(dl)) {
        out.failed = true;
        break;
      }
      for (std::size_t j = 0; j < q.size(); ++j) corr[j] = grad[j] * dl;
      const auto clamped = adaptive_clamp(corr, cfg.clamp_percentile);
      for (std::size_t j = 0; j < q.size(); ++j) {
        q[j] += clamped[j];
        moved += clamped[j].norm();
      }
      lambda[c] += dl;
    }
    if (!out.failed) {
      for (const auto& v : q) {
        if (!v.allFinite()) {
          out.failed = true;
          break;
        }
      }
    }
    if (out.failed) break;
    out.iterations = pass + 1;
    out.correction_history.push_back(moved);
    out.residual_history.push_back(residual().total_abs());
  }

  if (out.failed) {
    out.lambda_hydro = out.lambda_devia = 0.0;
    return out;  // offsets keep their pre-solve values
  }
  out.offsets = std::move(q);
  out.lambda_hydro = lambda[0];
  out.lambda_devia = lambda[1];
  return out;
}

/// Solves every active neighborhood in ascending rgp_id order.
inline SolverState solve_quasistatic(std::span<const Neighborhood> neighborhoods,
                                     std::span<const DeformationGradient> gradients,
                                     const RunConfig& cfg) {
  if (neighborhoods.size() != gradients.size())
    throw InputError("solve_quasistatic: neighborhoods and gradients differ in length");
  std::vector<std::size_t> order(neighborhoods.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return neighborhoods[a].rgp_id < neighborhoods[b].rgp_id;
  });
  SolverState state;
  state.rgps.reserve(order.size());
  for (auto i : order) state.rgps.push_back(solve_rgp(neighborhoods[i], gradients[i], cfg));
  return state;
}

/// The neighborhood with its current offsets replaced by solved ones.
inline Neighborhood with_offsets(const Neighborhood& nbh, std::vector<Vec3> offsets) {
  Neighborhood out = nbh;
  out.offsets_current = std::move(offsets);
  return out;
}

}  // namespace taff
