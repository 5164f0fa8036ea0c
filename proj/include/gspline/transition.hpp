#pragma once

// State transition matrices of x' = A(t) x, the segment Gramian S and the
// controllability Gramian W.

#include <cstddef>
#include <memory>

#include "gspline/errors.hpp"
#include "gspline/linalg.hpp"
#include "gspline/matrix_function.hpp"
#include "gspline/ode.hpp"

namespace gspline {

/// Phi(t, s) on a working interval [t_base, t_end]. Immutable once built.
///
/// Holds two trajectories started at t_base: the forward solution Phi(t, t_base)
/// of d/dt Phi = A Phi, and Phi(t_base, t) from the adjoint relation
/// d/dt Phi(t_base, t) = -Phi(t_base, t) A(t). Any Phi(t, s) is their product.
class TransitionOperator {
 public:
  TransitionOperator(MatrixFunction a, double t_base, double t_end, const OdeOptions& opt = {})
      : a_(std::move(a)), t_base_(t_base), t_end_(t_end) {
    if (a_.rows() != a_.cols()) throw DimensionError("transition: A(t) is not square");
    if (!(t_base < t_end)) throw std::invalid_argument("transition: requires t_base < t_end");
    const auto n = static_cast<Eigen::Index>(a_.rows());
    const Vector id = flatten(Matrix::Identity(n, n));
    forward_ = integrate(
        [this, n](double t, const Vector& y) -> Vector {
          return flatten(a_.eval(t) * unflatten(y, n, n));
        },
        id, t_base, t_end, opt);
    inverse_ = integrate(
        [this, n](double t, const Vector& y) -> Vector {
          return flatten(-unflatten(y, n, n) * a_.eval(t));
        },
        id, t_base, t_end, opt);
  }

  std::size_t dimension() const { return a_.rows(); }
  double t_base() const { return t_base_; }
  double t_end() const { return t_end_; }
  const MatrixFunction& a() const { return a_; }

  /// Phi(t, t_base).
  Matrix from_base(double t) const { return unflatten(forward_(t), n(), n()); }
  /// Phi(t_base, t).
  Matrix to_base(double t) const { return unflatten(inverse_(t), n(), n()); }
  /// d/dt Phi(t_base, t), from the dense interpolant (not from A).
  Matrix to_base_derivative(double t) const { return unflatten(inverse_.derivative(t), n(), n()); }
  /// Phi(t, s) = Phi(t, t_base) Phi(t_base, s).
  Matrix operator()(double t, double s) const { return from_base(t) * to_base(s); }

  const DenseTrajectory& forward_trajectory() const { return forward_; }
  const DenseTrajectory& inverse_trajectory() const { return inverse_; }

 private:
  Eigen::Index n() const { return static_cast<Eigen::Index>(a_.rows()); }

  MatrixFunction a_;
  double t_base_;
  double t_end_;
  DenseTrajectory forward_;
  DenseTrajectory inverse_;
};

inline TransitionOperator build_transition(const MatrixFunction& a, double t_i, double t_j,
                                           const OdeOptions& opt = {}) {
  return TransitionOperator(a, t_i, t_j, opt);
}

/// S = int_{t0}^{t1} Phi(t_base, s) Phi(t_base, s)' ds, symmetrized. Throws
/// NumericalFailure when the result is not positive definite.
inline Matrix gramian_s(const TransitionOperator& op, double t0, double t1, const OdeOptions& opt = {}) {
  const Matrix s = symmetrize(quadrature(
      [&](double t) {
        const Matrix p = op.to_base(t);
        return Matrix(p * p.transpose());
      },
      t0, t1, opt));
  if (!cholesky_pd(s).positive_definite) {
    throw NumericalFailure("gramian S is not positive definite on the segment");
  }
  return s;
}

struct ControllabilityResult {
  Matrix w;
  bool controllable = false;
};

/// W = int_{tau0}^{tau1} Phi(tau0, s) B(s) B(s)' Phi(tau0, s)' ds and the Kalman verdict PD(W).
inline ControllabilityResult controllability_gramian_w(const MatrixFunction& a, const MatrixFunction& b,
                                                       double tau0, double tau1,
                                                       const OdeOptions& opt = {}) {
  if (b.rows() != a.rows()) throw DimensionError("controllability: B row count differs from A");
  const TransitionOperator op(a, tau0, tau1, opt);
  ControllabilityResult out;
  out.w = symmetrize(quadrature(
      [&](double t) {
        const Matrix pb = op.to_base(t) * b.eval(t);
        return Matrix(pb * pb.transpose());
      },
      tau0, tau1, opt));
  out.controllable = cholesky_pd(out.w).positive_definite;
  return out;
}

}  // namespace gspline
