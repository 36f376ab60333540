#pragma once

// Small dense kernels used by the power-control solvers: Perron root of a
// nonnegative matrix, M-matrix test, the rank-one resolvent identity and a
// checked linear solve.

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include <Eigen/Dense>

#include "mimopc/types.hpp"

namespace mimopc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// u * w^T, kept in factored form.
struct RankOneMatrix {
  Vector left;
  Vector right;

  Eigen::Index size() const { return left.size(); }
  double trace() const { return left.dot(right); }
  Vector apply(const Vector& v) const { return left * right.dot(v); }
  Matrix dense() const { return left * right.transpose(); }
};

namespace detail {

inline void require_nonnegative_square(const Matrix& m) {
  if (m.rows() != m.cols()) throw DomainError("spectral_radius: matrix is not square");
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double x = m.data()[i];
    if (!std::isfinite(x) || x < 0.0)
      throw DomainError("spectral_radius: matrix must be finite and nonnegative");
  }
}

inline double dense_spectral_radius(const Matrix& m) {
  Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalue fallback failed");
  double r = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    r = std::max(r, std::abs(es.eigenvalues()[i]));
  return r;
}

}  // namespace detail

/// Perron root of a nonnegative square matrix.
///
/// Shifted power iteration from the all-ones vector. Every iterate is strictly
/// positive, so min/max of (Bx)_i / x_i bracket r(B) (Collatz-Wielandt); the
/// iteration stops once the bracket is tol-relative tight. Reducible inputs whose
/// bracket stalls (zero rows, slow mixing) fall back to a dense eigenvalue
/// computation.
inline double spectral_radius(const Matrix& m, double tol = 1e-12) {
  detail::require_nonnegative_square(m);
  const Eigen::Index n = m.rows();
  if (n == 0) return 0.0;
  const double shift = m.rowwise().sum().maxCoeff();
  if (shift == 0.0) return 0.0;

  const int max_iter = static_cast<int>(std::max<Eigen::Index>(100 * n, 1000));
  Vector x = Vector::Ones(n);
  Vector y(n);
  double lo = 0.0;
  double hi = shift;
  double checkpoint = hi - lo;
  for (int it = 0; it < max_iter; ++it) {
    y.noalias() = m * x;
    const Vector ratio = y.cwiseQuotient(x);
    lo = std::max(lo, ratio.minCoeff());
    hi = std::min(hi, ratio.maxCoeff());
    if (hi - lo <= tol * hi) return 0.5 * (lo + hi);
    // zero rows or slow mixing: the bracket stops shrinking, go dense
    if (it % 64 == 63) {
      if (hi - lo > 0.5 * checkpoint) break;
      checkpoint = hi - lo;
    }
    x = y + shift * x;
    x /= x.maxCoeff();
  }
  try {
    return detail::dense_spectral_radius(m);
  } catch (const NumericalError&) {
    throw NumericalError("spectral_radius: power iteration did not converge", 0.5 * (lo + hi));
  }
}

/// True iff s*I - b is a nonsingular M-matrix, with a relative safety margin.
inline bool is_nonsingular_m_matrix(double s, const Matrix& b, double tol = kFeasibilityMargin) {
  if (!(s > 0.0)) throw DomainError("is_nonsingular_m_matrix: s must be positive");
  return s > spectral_radius(b) * (1.0 + tol);
}

/// (I - B)^{-1} v for rank-one B, via (I - B)^{-1} = I + B / (1 - tr B).
inline Vector rank_one_resolvent_apply(const RankOneMatrix& b, const Vector& v,
                                       double singular_tol = 1e-12) {
  if (b.left.size() != v.size() || b.right.size() != v.size())
    throw DomainError("rank_one_resolvent_apply: dimension mismatch");
  const double denom = 1.0 - b.trace();
  if (std::abs(denom) < singular_tol)
    throw NumericalError("rank_one_resolvent_apply: I - B is singular (tr B = 1)", denom);
  return v + b.apply(v) / denom;
}

/// Solves a x = b. Throws NumericalError when a is singular or the relative
/// residual exceeds 1e-10 after one refinement step.
inline Vector solve_linear(const Matrix& a, const Vector& b) {
  if (a.rows() != a.cols() || a.rows() != b.size())
    throw DomainError("solve_linear: dimension mismatch");
  const double bnorm = b.norm();
  if (b.size() == 0 || bnorm == 0.0) return Vector::Zero(b.size());

  Eigen::PartialPivLU<Matrix> lu(a);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-15)) throw NumericalError("solve_linear: matrix is singular", rcond);
  Vector x = lu.solve(b);
  Vector r = b - a * x;
  x += lu.solve(r);
  r = b - a * x;
  const double rel = r.norm() / bnorm;
  if (!std::isfinite(rel) || rel > 1e-10)
    throw NumericalError("solve_linear: residual " + std::to_string(rel) + " above 1e-10", rel);
  return x;
}

}  // namespace mimopc
