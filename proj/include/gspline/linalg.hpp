#pragma once

// Dense linear algebra for the small systems that appear here (n <= ~12,
// global spline systems of a few hundred unknowns). Storage and kernels are
// Eigen's; the pivot thresholds are ours.

#include <optional>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/LU>

#include "gspline/errors.hpp"

namespace gspline {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Maximum absolute row sum.
inline double norm_inf(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

inline double norm_inf(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Partial-pivoted LU factorization that refuses near-singular matrices.
class LuFactor {
 public:
  explicit LuFactor(const Matrix& m) {
    if (m.rows() != m.cols()) throw DimensionError("lu_solve: matrix is not square");
    if (!m.allFinite()) throw SingularMatrixError("lu_solve: non-finite matrix entries");
    lu_.compute(m);
    const double threshold = 1e-12 * norm_inf(m);
    const auto diag = lu_.matrixLU().diagonal();
    for (Eigen::Index i = 0; i < diag.size(); ++i) {
      if (!(std::abs(diag[i]) > threshold)) {
        throw SingularMatrixError("lu_solve: pivot " + std::to_string(i) + " has magnitude " +
                                  std::to_string(std::abs(diag[i])) + " below threshold " +
                                  std::to_string(threshold));
      }
    }
  }

  template <typename Rhs>
  auto solve(const Rhs& rhs) const {
    if (rhs.rows() != lu_.rows()) throw DimensionError("lu_solve: rhs row count mismatch");
    return lu_.solve(rhs).eval();
  }

  /// Ratio of largest to smallest |pivot|; a cheap conditioning hint for diagnostics.
  double pivot_ratio() const {
    const auto d = lu_.matrixLU().diagonal().cwiseAbs();
    return d.maxCoeff() / d.minCoeff();
  }

  const Eigen::PartialPivLU<Matrix>& factor() const { return lu_; }

 private:
  Eigen::PartialPivLU<Matrix> lu_;
};

/// Solves M X = rhs for a vector or matrix right-hand side.
template <typename Derived>
auto lu_solve(const Matrix& m, const Eigen::MatrixBase<Derived>& rhs) {
  return LuFactor(m).solve(rhs.derived());
}

struct CholeskyResult {
  bool positive_definite = false;
  Matrix lower;  // valid only when positive_definite
};

/// Symmetrizes `m`, then tests positive definiteness by Cholesky with pivot
/// threshold 1e-12 * trace / n. Never throws on indefinite input.
inline CholeskyResult cholesky_pd(const Matrix& m) {
  CholeskyResult out;
  if (m.rows() != m.cols() || m.rows() == 0 || !m.allFinite()) return out;
  const Matrix sym = symmetrize(m);
  const double n = static_cast<double>(sym.rows());
  const double threshold = 1e-12 * sym.trace() / n;
  if (!(threshold > 0.0)) return out;
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() != Eigen::Success) return out;
  Matrix lower = llt.matrixL();
  // Pivots of the LDL^T form are the squared diagonal of L.
  for (Eigen::Index i = 0; i < lower.rows(); ++i) {
    if (!(lower(i, i) * lower(i, i) > threshold)) return out;
  }
  out.positive_definite = true;
  out.lower = std::move(lower);
  return out;
}

}  // namespace gspline
