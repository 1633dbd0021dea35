#pragma once

// Constraint sensitivity Jacobian at an RGP, the stiffness metric K = JᵀJ + εI
// and its eigen-structure.

#include "tissue_affordance/solver.hpp"

namespace taff {

/// J = ∂[C_hydro, C_devia]/∂p_i with neighbors and rest offsets held fixed.
/// Since every current offset is p_j − p_i, ∂F/∂(p_i)_k = −e_k sᵀA⁻¹ with s = Σ w_j Q_j.
inline Mat23 rgp_constraint_jacobian(const Neighborhood& nbh, const DeformationGradient& dg) {
  if (nbh.size() == 0) throw InputError("rgp_constraint_jacobian: empty neighborhood");
  Vec3 s = Vec3::Zero();
  for (std::size_t j = 0; j < nbh.size(); ++j) s += nbh.weights[j] * nbh.offsets_rest[j];
  const Vec3 g = dg.moment_inverse * s;
  Mat23 jac;
  jac.row(0) = -(cofactor(dg.F) * g).transpose();
  jac.row(1) = -2.0 * (dg.F * g).transpose();
  return jac;
}

namespace detail {

/// First component with |x_k| > 1e-12·‖x‖ made positive.
inline Vec3 canonical_sign(Vec3 v) {
  const double tol = 1e-12 * v.norm();
  for (int k = 0; k < 3; ++k) {
    if (std::abs(v[k]) > tol) return v[k] < 0.0 ? Vec3(-v) : v;
  }
  return v;
}

}  // namespace detail

struct StiffnessMetric {
  Mat23 J = Mat23::Zero();
  Mat3 K = Mat3::Identity();
  Vec3 eigenvalues = Vec3::Ones();         // ascending
  Mat3 eigenvectors = Mat3::Identity();    // column k pairs with eigenvalues[k]
  double eps = 0.0;
};

inline StiffnessMetric stiffness_metric(const Mat23& jac, double eps) {
  if (!(eps > 0.0)) throw InputError("stiffness_metric: eps must be positive");
  StiffnessMetric m;
  m.J = jac;
  m.eps = eps;
  Mat3 jtj = jac.transpose() * jac;
  jtj = 0.5 * (jtj + jtj.transpose());
  m.K = jtj + eps * Mat3::Identity();
  // Decompose the PSD part and shift by eps, so rounding cannot push an
  // eigenvalue below eps when ‖J‖² dwarfs it.
  Eigen::SelfAdjointEigenSolver<Mat3> es(jtj);
  if (es.info() != Eigen::Success) throw NumericalError("stiffness_metric: eigen-decomposition failed");
  m.eigenvalues = es.eigenvalues().cwiseMax(0.0) + Vec3::Constant(eps);
  for (int k = 0; k < 3; ++k) m.eigenvectors.col(k) = detail::canonical_sign(es.eigenvectors().col(k));
  return m;
}

struct CompliantDirection {
  Vec3 direction = Vec3::UnitX();
  bool degenerate = false;
};

inline constexpr double kEigenTieRatio = 1e-9;

/// Eigenvector of the smallest eigenvalue. When the smallest eigenvalue is not
/// separated by 1e-9·λ_max, returns the normalized projection of the world axis
/// that projects most strongly onto the tied subspace, flagged degenerate.
inline CompliantDirection compliant_direction(const StiffnessMetric& k) {
  CompliantDirection out;
  const Vec3& ev = k.eigenvalues;
  const double tol = kEigenTieRatio * std::abs(ev(2));
  if (ev(1) - ev(0) >= tol) {
    out.direction = k.eigenvectors.col(0);
    return out;
  }
  out.degenerate = true;
  Mat3 proj = k.eigenvectors.col(0) * k.eigenvectors.col(0).transpose() +
              k.eigenvectors.col(1) * k.eigenvectors.col(1).transpose();
  if (ev(2) - ev(0) < tol) proj = Mat3::Identity();
  int best = 0;
  double best_n = -1.0;
  for (int a = 0; a < 3; ++a) {
    const double n = proj.col(a).norm();
    if (n > best_n + 1e-12) {
      best_n = n;
      best = a;
    }
  }
  out.direction = detail::canonical_sign(proj.col(best).normalized());
  return out;
}

}  // namespace taff
