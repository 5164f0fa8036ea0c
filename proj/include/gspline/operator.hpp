#pragma once

// Linear differential operators with matrix coefficients, kept in the
// expanded normal form  L = sum_{k=0}^{q} C_k(t) D^k  with C_q = +-I.
//
// Two input conventions are accepted:
//   scalar  L = D^p + a_{p-1} D^{p-1} + ... + a_0       (C_k = a_k)
//   matrix  L = D^p - A_{p-1} D^{p-1} - ... - A_0       (C_k = -A_k)
// The marker is carried along so coefficients can be reported back in the
// convention they were given in.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gspline/errors.hpp"
#include "gspline/expr.hpp"
#include "gspline/linalg.hpp"
#include "gspline/matrix_function.hpp"

namespace gspline {

enum class Convention { scalar, matrix };

namespace detail {

inline double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace detail

class LinearDiffOperator {
 public:
  /// `lower[k]` is the coefficient of D^k in the given convention, k < p.
  static LinearDiffOperator from_coefficients(Convention conv, const std::vector<MatrixFunction>& lower,
                                              std::size_t n = 0) {
    if (lower.empty() && n == 0) throw DimensionError("operator: dimension unknown for order 0");
    const std::size_t dim = lower.empty() ? n : lower.front().rows();
    std::vector<MatrixFunction> c;
    c.reserve(lower.size() + 1);
    for (const auto& m : lower) {
      if (m.rows() != dim || m.cols() != dim) throw DimensionError("operator: coefficient shape mismatch");
      c.push_back(conv == Convention::scalar ? m : -m);
    }
    c.push_back(MatrixFunction::identity(dim));
    return LinearDiffOperator(conv, std::move(c), 1);
  }

  /// Scalar operator from coefficient expressions a_0 .. a_{p-1}.
  static LinearDiffOperator scalar(const std::vector<TimeExpr>& a) {
    std::vector<MatrixFunction> lower;
    for (const auto& e : a) {
      MatrixFunction m(1, 1);
      m(0, 0) = e;
      lower.push_back(m);
    }
    return from_coefficients(Convention::scalar, lower, 1);
  }

  /// D^p in dimension n.
  static LinearDiffOperator power(std::size_t p, std::size_t n, Convention conv = Convention::scalar) {
    return from_coefficients(conv, std::vector<MatrixFunction>(p, MatrixFunction::zero(n)), n);
  }

  std::size_t order() const { return coeffs_.size() - 1; }
  std::size_t dimension() const { return coeffs_.front().rows(); }
  Convention convention() const { return conv_; }
  /// Sign of the leading coefficient, +1 or -1.
  int leading_sign() const { return sign_; }

  /// Normal-form coefficient C_k, k = 0..order (C_order = leading_sign * I).
  const MatrixFunction& coefficient(std::size_t k) const { return coeffs_.at(k); }
  const std::vector<MatrixFunction>& coefficients() const { return coeffs_; }

  /// Coefficient of D^k written in the operator's own convention.
  MatrixFunction convention_coefficient(std::size_t k) const {
    return conv_ == Convention::scalar || k == order() ? coeffs_.at(k) : -coeffs_.at(k);
  }

  /// sum_k C_k(t) f^{(k)}(t); derivs[k] = f^{(k)}(t).
  Vector apply(std::span<const Vector> derivs, double t) const {
    if (derivs.size() < order() + 1) {
      throw MissingDerivativeError("apply: operator of order " + std::to_string(order()) + " needs " +
                                   std::to_string(order() + 1) + " derivative values, got " +
                                   std::to_string(derivs.size()));
    }
    Vector out = Vector::Zero(static_cast<Eigen::Index>(dimension()));
    for (std::size_t k = 0; k <= order(); ++k) {
      if (static_cast<std::size_t>(derivs[k].size()) != dimension()) {
        throw DimensionError("apply: derivative vector has wrong dimension");
      }
      out += coeffs_[k].eval(t) * derivs[k];
    }
    return out;
  }

  /// Applies L to a vector of expressions, differentiating them symbolically.
  Vector apply(const std::vector<TimeExpr>& f, double t) const {
    if (f.size() != dimension()) throw DimensionError("apply: function has wrong dimension");
    std::vector<Vector> derivs;
    std::vector<TimeExpr> cur = f;
    for (std::size_t k = 0; k <= order(); ++k) {
      Vector v(static_cast<Eigen::Index>(dimension()));
      for (std::size_t i = 0; i < cur.size(); ++i) v[static_cast<Eigen::Index>(i)] = cur[i].eval(t);
      derivs.push_back(v);
      for (auto& e : cur) e = e.derivative();
    }
    return apply(derivs, t);
  }

  /// Formal adjoint: L* g = sum_k (-1)^k D^k (C_k' g), expanded by Leibniz.
  friend LinearDiffOperator adjoint(const LinearDiffOperator& l) {
    const std::size_t q = l.order();
    const std::size_t n = l.dimension();
    std::vector<MatrixFunction> c(q + 1, MatrixFunction::zero(n));
    for (std::size_t k = 0; k <= q; ++k) {
      const MatrixFunction ct = l.coeffs_[k].transpose();
      const double sk = (k % 2 == 0) ? 1.0 : -1.0;
      for (std::size_t j = 0; j <= k; ++j) {
        const double w = sk * detail::binomial(static_cast<int>(k), static_cast<int>(j));
        c[j] = c[j] + w * ct.derivative(static_cast<int>(k - j));
      }
    }
    return LinearDiffOperator(l.conv_, std::move(c), (q % 2 == 0 ? 1 : -1) * l.sign_);
  }

  /// (L1 L2) f = L1 (L2 f).
  friend LinearDiffOperator compose(const LinearDiffOperator& l1, const LinearDiffOperator& l2) {
    if (l1.dimension() != l2.dimension()) throw DimensionError("compose: dimension mismatch");
    const std::size_t q1 = l1.order(), q2 = l2.order();
    const std::size_t n = l1.dimension();
    std::vector<MatrixFunction> c(q1 + q2 + 1, MatrixFunction::zero(n));
    for (std::size_t k = 0; k <= q1; ++k) {
      for (std::size_t j = 0; j <= q2; ++j) {
        // D^k (N_j D^j) = sum_i binom(k, i) N_j^{(i)} D^{k - i + j}
        for (std::size_t i = 0; i <= k; ++i) {
          const double w = detail::binomial(static_cast<int>(k), static_cast<int>(i));
          c[k - i + j] = c[k - i + j] + w * (l1.coeffs_[k] * l2.coeffs_[j].derivative(static_cast<int>(i)));
        }
      }
    }
    return LinearDiffOperator(l1.conv_, std::move(c), l1.sign_ * l2.sign_);
  }

 private:
  LinearDiffOperator(Convention conv, std::vector<MatrixFunction> c, int sign)
      : conv_(conv), coeffs_(std::move(c)), sign_(sign) {
    // Pin the leading coefficient to exactly sign * I.
    coeffs_.back() = MatrixFunction::identity(coeffs_.back().rows(), static_cast<double>(sign));
  }

  Convention conv_;
  std::vector<MatrixFunction> coeffs_;
  int sign_;
};

/// First-order form z' = F(t) z for z = (x, x', ..., x^{(q-1)}), solving L x = 0.
inline MatrixFunction companion_reduction(const LinearDiffOperator& l) {
  const std::size_t q = l.order();
  const std::size_t n = l.dimension();
  if (q == 0) throw DimensionError("companion_reduction: order 0 operator");
  MatrixFunction f(q * n, q * n);
  for (std::size_t b = 0; b + 1 < q; ++b) {
    for (std::size_t i = 0; i < n; ++i) f(b * n + i, (b + 1) * n + i) = TimeExpr::constant(1.0);
  }
  // sigma x^{(q)} + sum_{k<q} C_k x^{(k)} = 0  =>  x^{(q)} = -sigma sum C_k x^{(k)}
  const double s = -static_cast<double>(l.leading_sign());
  for (std::size_t k = 0; k < q; ++k) {
    const MatrixFunction& c = l.coefficient(k);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) f((q - 1) * n + i, k * n + j) = s * c(i, j);
    }
  }
  return f;
}

}  // namespace gspline
