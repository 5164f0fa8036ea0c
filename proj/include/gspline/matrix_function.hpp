#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gspline/errors.hpp"
#include "gspline/expr.hpp"
#include "gspline/linalg.hpp"

namespace gspline {

/// Matrix of expressions in t, e.g. A(t), B(t) or an operator coefficient.
class MatrixFunction {
 public:
  MatrixFunction() = default;
  MatrixFunction(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), entries_(rows * cols, TimeExpr::constant(0.0)) {}

  static MatrixFunction zero(std::size_t n) { return MatrixFunction(n, n); }

  static MatrixFunction identity(std::size_t n, double scale = 1.0) {
    MatrixFunction m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = TimeExpr::constant(scale);
    return m;
  }

  static MatrixFunction constant(const Matrix& value) {
    MatrixFunction m(static_cast<std::size_t>(value.rows()), static_cast<std::size_t>(value.cols()));
    for (std::size_t i = 0; i < m.rows_; ++i) {
      for (std::size_t j = 0; j < m.cols_; ++j) m(i, j) = TimeExpr::constant(value(i, j));
    }
    return m;
  }

  /// Builds from rows of expression strings; throws ParseError or DimensionError.
  static MatrixFunction parse(const std::vector<std::vector<std::string>>& rows) {
    if (rows.empty()) throw DimensionError("matrix has no rows");
    MatrixFunction m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols_) throw DimensionError("ragged matrix row " + std::to_string(i));
      for (std::size_t j = 0; j < m.cols_; ++j) m(i, j) = gspline::parse(rows[i][j]);
    }
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  TimeExpr& operator()(std::size_t i, std::size_t j) { return entries_[i * cols_ + j]; }
  const TimeExpr& operator()(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }

  Matrix eval(double t) const {
    Matrix out(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t j = 0; j < cols_; ++j) out(i, j) = entries_[i * cols_ + j].eval(t);
    }
    return out;
  }

  Matrix operator()(double t) const { return eval(t); }

  bool is_constant() const {
    for (const auto& e : entries_) {
      if (!e.is_constant()) return false;
    }
    return true;
  }

  MatrixFunction derivative() const {
    MatrixFunction out(rows_, cols_);
    for (std::size_t k = 0; k < entries_.size(); ++k) out.entries_[k] = entries_[k].derivative();
    return out;
  }

  MatrixFunction derivative(int order) const {
    MatrixFunction out = *this;
    for (int i = 0; i < order; ++i) out = out.derivative();
    return out;
  }

  MatrixFunction transpose() const {
    MatrixFunction out(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
    }
    return out;
  }

  MatrixFunction substitute(const TimeExpr& inner) const {
    MatrixFunction out(rows_, cols_);
    for (std::size_t k = 0; k < entries_.size(); ++k) out.entries_[k] = entries_[k].substitute(inner);
    return out;
  }

  friend MatrixFunction operator+(const MatrixFunction& a, const MatrixFunction& b) {
    check_same_shape(a, b);
    MatrixFunction out(a.rows_, a.cols_);
    for (std::size_t k = 0; k < a.entries_.size(); ++k) out.entries_[k] = a.entries_[k] + b.entries_[k];
    return out;
  }

  friend MatrixFunction operator-(const MatrixFunction& a, const MatrixFunction& b) {
    check_same_shape(a, b);
    MatrixFunction out(a.rows_, a.cols_);
    for (std::size_t k = 0; k < a.entries_.size(); ++k) out.entries_[k] = a.entries_[k] - b.entries_[k];
    return out;
  }

  friend MatrixFunction operator-(const MatrixFunction& a) {
    MatrixFunction out(a.rows_, a.cols_);
    for (std::size_t k = 0; k < a.entries_.size(); ++k) out.entries_[k] = -a.entries_[k];
    return out;
  }

  friend MatrixFunction operator*(double c, const MatrixFunction& a) {
    MatrixFunction out(a.rows_, a.cols_);
    for (std::size_t k = 0; k < a.entries_.size(); ++k) out.entries_[k] = c * a.entries_[k];
    return out;
  }

  friend MatrixFunction operator*(const MatrixFunction& a, const MatrixFunction& b) {
    if (a.cols_ != b.rows_) throw DimensionError("matrix function product: inner dimensions differ");
    MatrixFunction out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i) {
      for (std::size_t j = 0; j < b.cols_; ++j) {
        TimeExpr acc = TimeExpr::constant(0.0);
        for (std::size_t k = 0; k < a.cols_; ++k) acc = acc + a(i, k) * b(k, j);
        out(i, j) = acc;
      }
    }
    return out;
  }

 private:
  static void check_same_shape(const MatrixFunction& a, const MatrixFunction& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw DimensionError("matrix function shapes differ");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<TimeExpr> entries_;
};

}  // namespace gspline
