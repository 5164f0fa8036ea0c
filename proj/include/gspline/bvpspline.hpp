#pragma once

// Generalized splines as piecewise solutions of L*L x = 0 with type-I
// conditions: interpolation at every knot, derivatives 1..p-1 prescribed at
// both ends, and continuity of x, x', ..., x^{(2p-2)} at interior knots.
//
// Each interval carries its own fundamental system of the companion form
// z' = F(t) z, z = (x, x', ..., x^{(2p-1)}), started from identity columns at
// the interval's left knot. One dense linear system of size 2pnm fixes the
// coefficients on all m intervals.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gspline/errors.hpp"
#include "gspline/linalg.hpp"
#include "gspline/matrix_function.hpp"
#include "gspline/ode.hpp"
#include "gspline/operator.hpp"

namespace gspline {

struct SplineSpec {
  LinearDiffOperator l;
  std::vector<double> knots;
  std::vector<Vector> values;
  /// f^{(k)}(t_0) and f^{(k)}(t_m) for k = 1..p-1, in that order.
  std::vector<Vector> left_derivatives;
  std::vector<Vector> right_derivatives;
};

struct SplineOptions {
  OdeOptions ode;
  /// Optional reordering of the canonical initial conditions: basis function j
  /// starts from identity column basis_permutation[j]. Empty means identity.
  std::vector<std::size_t> basis_permutation;
};

/// 2pn solutions of z' = F z on [t0, t1], column j started from e_{perm[j]}.
class FundamentalSystem {
 public:
  FundamentalSystem(const MatrixFunction& f, double t0, double t1, const OdeOptions& opt = {},
                    const std::vector<std::size_t>& perm = {})
      : t0_(t0), t1_(t1) {
    const std::size_t dim = f.rows();
    if (!perm.empty() && perm.size() != dim) throw DimensionError("fundamental_system: bad permutation size");
    const auto field = [&f](double t, const Vector& z) -> Vector { return f.eval(t) * z; };
    for (std::size_t j = 0; j < dim; ++j) {
      Vector e = Vector::Zero(static_cast<Eigen::Index>(dim));
      e[static_cast<Eigen::Index>(perm.empty() ? j : perm[j])] = 1.0;
      columns_.push_back(integrate(field, e, t0, t1, opt));
    }
  }

  std::size_t size() const { return columns_.size(); }
  double t0() const { return t0_; }
  double t1() const { return t1_; }
  const DenseTrajectory& column(std::size_t j) const { return columns_.at(j); }

  /// Z(t), one column per basis function.
  Matrix eval(double t) const {
    const auto dim = static_cast<Eigen::Index>(columns_.size());
    Matrix z(dim, dim);
    for (Eigen::Index j = 0; j < dim; ++j) z.col(j) = columns_[static_cast<std::size_t>(j)](t);
    return z;
  }

  /// Z'(t) from the dense interpolants (not from F).
  Matrix derivative(double t) const {
    const auto dim = static_cast<Eigen::Index>(columns_.size());
    Matrix z(dim, dim);
    for (Eigen::Index j = 0; j < dim; ++j) z.col(j) = columns_[static_cast<std::size_t>(j)].derivative(t);
    return z;
  }

 private:
  double t0_, t1_;
  std::vector<DenseTrajectory> columns_;
};

inline FundamentalSystem fundamental_system(const LinearDiffOperator& lstar_l, double t0, double t1,
                                            const OdeOptions& opt = {}) {
  return FundamentalSystem(companion_reduction(lstar_l), t0, t1, opt);
}

class PiecewiseSpline {
 public:
  std::size_t order() const { return p_; }
  std::size_t dimension() const { return n_; }
  const std::vector<double>& knots() const { return knots_; }
  std::size_t intervals() const { return pieces_.size(); }
  const LinearDiffOperator& euler_lagrange() const { return ll_; }
  const Vector& coefficients(std::size_t i) const { return coef_.at(i); }

  /// Interval containing t; interior knots belong to the interval on their left.
  std::size_t interval_of(double t) const {
    if (t < knots_.front() || t > knots_.back()) throw std::out_of_range("spline: t outside [t_0, t_m]");
    const auto it = std::lower_bound(knots_.begin() + 1, knots_.end() - 1, t);
    return static_cast<std::size_t>(it - knots_.begin()) - 1;
  }

  /// Companion state z = (s, s', ..., s^{(2p-1)}) of piece i at t.
  Vector state(std::size_t i, double t) const { return pieces_.at(i).eval(t) * coef_.at(i); }
  Vector state(double t) const { return state(interval_of(t), t); }

  /// s^{(k)}(t) on piece i, k <= 2p. Orders below 2p are read off the
  /// companion state; order 2p is the derivative of the interpolated state.
  Vector derivative(std::size_t i, double t, std::size_t k) const {
    if (k > 2 * p_) throw MissingDerivativeError("spline: derivative order above 2p");
    const auto n = static_cast<Eigen::Index>(n_);
    if (k < 2 * p_) return state(i, t).segment(static_cast<Eigen::Index>(k) * n, n);
    return (pieces_.at(i).derivative(t) * coef_.at(i)).tail(n);
  }
  Vector derivative(double t, std::size_t k) const { return derivative(interval_of(t), t, k); }
  Vector operator()(double t) const { return derivative(t, 0); }

  /// s, s', ..., s^{(upto)} on piece i.
  std::vector<Vector> derivatives(std::size_t i, double t, std::size_t upto) const {
    std::vector<Vector> out;
    for (std::size_t k = 0; k <= upto; ++k) out.push_back(derivative(i, t, k));
    return out;
  }

  /// L*L s at t on piece i.
  Vector residual(std::size_t i, double t) const { return ll_.apply(derivatives(i, t, 2 * p_), t); }

 private:
  friend PiecewiseSpline solve_spline(const SplineSpec&, const SplineOptions&);

  std::size_t p_ = 0, n_ = 0;
  std::vector<double> knots_;
  LinearDiffOperator ll_ = LinearDiffOperator::power(0, 1);
  MatrixFunction f_;
  std::vector<FundamentalSystem> pieces_;
  std::vector<Vector> coef_;
};

inline PiecewiseSpline solve_spline(const SplineSpec& spec, const SplineOptions& opt = {}) {
  const std::size_t p = spec.l.order();
  const std::size_t n = spec.l.dimension();
  const auto& tk = spec.knots;
  if (p == 0) throw DimensionError("solve_spline: operator must have order >= 1");
  if (tk.size() < 2) throw std::invalid_argument("solve_spline: need at least two knots");
  for (std::size_t i = 0; i + 1 < tk.size(); ++i) {
    if (!(tk[i] < tk[i + 1])) throw std::invalid_argument("solve_spline: knots must be strictly increasing");
  }
  if (spec.values.size() != tk.size()) throw DimensionError("solve_spline: one value per knot required");
  if (spec.left_derivatives.size() != p - 1 || spec.right_derivatives.size() != p - 1) {
    throw DimensionError("solve_spline: exactly p-1 boundary derivatives required at each end");
  }
  auto check_dim = [n](const Vector& v) {
    if (static_cast<std::size_t>(v.size()) != n) throw DimensionError("solve_spline: value dimension mismatch");
  };
  for (const auto& v : spec.values) check_dim(v);
  for (const auto& v : spec.left_derivatives) check_dim(v);
  for (const auto& v : spec.right_derivatives) check_dim(v);

  PiecewiseSpline out;
  out.p_ = p;
  out.n_ = n;
  out.knots_ = tk;
  out.ll_ = compose(adjoint(spec.l), spec.l);
  out.f_ = companion_reduction(out.ll_);

  const std::size_t m = tk.size() - 1;
  const std::size_t nb = 2 * p * n;  // basis functions per interval
  const auto nbi = static_cast<Eigen::Index>(nb);
  const auto ni = static_cast<Eigen::Index>(n);
  std::vector<Matrix> zl, zr;
  for (std::size_t i = 0; i < m; ++i) {
    out.pieces_.emplace_back(out.f_, tk[i], tk[i + 1], opt.ode, opt.basis_permutation);
    zl.push_back(out.pieces_.back().eval(tk[i]));
    zr.push_back(out.pieces_.back().eval(tk[i + 1]));
  }

  const auto size = static_cast<Eigen::Index>(nb * m);
  Matrix g = Matrix::Zero(size, size);
  Vector rhs = Vector::Zero(size);
  Eigen::Index row = 0;
  auto block_rows = [ni](const Matrix& z, std::size_t k, std::size_t count) {
    return z.middleRows(static_cast<Eigen::Index>(k) * ni, static_cast<Eigen::Index>(count) * ni);
  };

  // Left end: s(t_0) = f_0 and s^{(k)}(t_0), k = 1..p-1.
  g.block(row, 0, static_cast<Eigen::Index>(p) * ni, nbi) = block_rows(zl[0], 0, p);
  rhs.segment(row, ni) = spec.values[0];
  for (std::size_t k = 1; k < p; ++k) rhs.segment(row + static_cast<Eigen::Index>(k) * ni, ni) = spec.left_derivatives[k - 1];
  row += static_cast<Eigen::Index>(p) * ni;

  // Interior knots: interpolation from the left, continuity of orders 0..2p-2.
  for (std::size_t i = 1; i < m; ++i) {
    const auto cl = static_cast<Eigen::Index>((i - 1) * nb);
    const auto cr = static_cast<Eigen::Index>(i * nb);
    g.block(row, cl, ni, nbi) = block_rows(zr[i - 1], 0, 1);
    rhs.segment(row, ni) = spec.values[i];
    row += ni;
    const auto nc = static_cast<Eigen::Index>(2 * p - 1) * ni;
    g.block(row, cl, nc, nbi) = block_rows(zr[i - 1], 0, 2 * p - 1);
    g.block(row, cr, nc, nbi) = -block_rows(zl[i], 0, 2 * p - 1);
    row += nc;
  }

  // Right end.
  const auto cl = static_cast<Eigen::Index>((m - 1) * nb);
  g.block(row, cl, static_cast<Eigen::Index>(p) * ni, nbi) = block_rows(zr[m - 1], 0, p);
  rhs.segment(row, ni) = spec.values[m];
  for (std::size_t k = 1; k < p; ++k) rhs.segment(row + static_cast<Eigen::Index>(k) * ni, ni) = spec.right_derivatives[k - 1];
  row += static_cast<Eigen::Index>(p) * ni;

  Vector c;
  try {
    c = LuFactor(g).solve(rhs);
  } catch (const SingularMatrixError& e) {
    const Eigen::JacobiSVD<Matrix> svd(g);
    const auto& sv = svd.singularValues();
    throw NumericalFailure("solve_spline: global " + std::to_string(size) + "x" + std::to_string(size) +
                           " system is singular (" + e.what() + "; condition estimate " +
                           std::to_string(sv(0) / sv(sv.size() - 1)) + ")");
  }
  for (std::size_t i = 0; i < m; ++i) out.coef_.push_back(c.segment(static_cast<Eigen::Index>(i * nb), nbi));
  return out;
}

/// sum over intervals of int |L s|^2 dt.
inline double spline_energy(const PiecewiseSpline& s, const LinearDiffOperator& l, const OdeOptions& opt = {}) {
  double total = 0.0;
  for (std::size_t i = 0; i < s.intervals(); ++i) {
    total += quadrature_scalar(
        [&](double t) { return l.apply(s.derivatives(i, t, l.order()), t).squaredNorm(); }, s.knots()[i],
        s.knots()[i + 1], opt);
  }
  return total;
}

}  // namespace gspline
