#pragma once

// Adaptive Dormand-Prince 5(4) integration with continuous (dense) output.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "gspline/errors.hpp"
#include "gspline/linalg.hpp"

namespace gspline {

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  std::size_t max_steps = 200000;
};

using VectorField = std::function<Vector(double, const Vector&)>;

/// Accepted-step mesh plus the interpolation data of every step. Immutable.
class DenseTrajectory {
 public:
  DenseTrajectory() = default;

  double t_start() const { return times_.front(); }
  double t_end() const { return times_.back(); }
  std::size_t dimension() const { return static_cast<std::size_t>(states_.front().size()); }
  const std::vector<double>& mesh() const { return times_; }
  const std::vector<Vector>& states() const { return states_; }
  std::size_t steps() const { return coeffs_.size(); }

  /// Solution at t. Mesh points return the stored state bit-for-bit.
  Vector operator()(double t) const { return eval(t); }

  Vector eval(double t) const {
    const std::size_t k = locate(t);
    if (t == times_[k]) return states_[k];
    if (k + 1 < times_.size() && t == times_[k + 1]) return states_[k + 1];
    const Matrix& r = coeffs_[k];
    const double theta = (t - times_[k]) / (times_[k + 1] - times_[k]);
    const double theta1 = 1.0 - theta;
    return r.col(0) +
           theta * (r.col(1) + theta1 * (r.col(2) + theta * (r.col(3) + theta1 * r.col(4))));
  }

  /// Time derivative of the interpolant. Equals the vector field at mesh points.
  Vector derivative(double t) const {
    const std::size_t k = std::min(locate(t), coeffs_.size() - 1);
    const Matrix& r = coeffs_[k];
    const double h = times_[k + 1] - times_[k];
    const double theta = (t - times_[k]) / h;
    const double theta1 = 1.0 - theta;
    const double s = 1.0 - 2.0 * theta;
    const Vector q = r.col(2) + theta * (r.col(3) + theta1 * r.col(4));
    return (r.col(1) + s * q + theta * theta1 * (r.col(3) + s * r.col(4))) / h;
  }

 private:
  friend DenseTrajectory integrate(const VectorField&, const Vector&, double, double, const OdeOptions&);

  // Index k of the step [times_[k], times_[k+1]] containing t (clamped to the range).
  std::size_t locate(double t) const {
    const double lo = std::min(times_.front(), times_.back());
    const double hi = std::max(times_.front(), times_.back());
    // Allow a few ulps of slack at the ends for callers that compute knots arithmetically.
    const double slack = 1e-12 * std::max(1.0, hi - lo);
    if (t < lo - slack || t > hi + slack) {
      throw std::out_of_range("DenseTrajectory: t = " + std::to_string(t) + " outside [" +
                              std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    if (coeffs_.empty()) return 0;
    const bool forward = times_.back() >= times_.front();
    std::size_t idx;
    if (forward) {
      idx = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
    } else {
      idx = static_cast<std::size_t>(
          std::upper_bound(times_.begin(), times_.end(), t, std::greater<double>()) - times_.begin());
    }
    if (idx == 0) return 0;
    return std::min(idx - 1, coeffs_.size() - 1);
  }

  std::vector<double> times_;
  std::vector<Vector> states_;
  std::vector<Matrix> coeffs_;  // dim x 5 per step
};

namespace detail {

inline double rms_scaled(const Vector& v, const Vector& scale) {
  if (v.size() == 0) return 0.0;
  return std::sqrt((v.array() / scale.array()).square().mean());
}

}  // namespace detail

/// Integrates y' = field(t, y) from t0 to t1 (t1 < t0 integrates backward).
inline DenseTrajectory integrate(const VectorField& field, const Vector& y0, double t0, double t1,
                                 const OdeOptions& opt = {}) {
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                   a76 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                   e6 = 22.0 / 525, e7 = -1.0 / 40;
  constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                   d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                   d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

  if (!y0.allFinite()) throw IntegrationError("integrate: non-finite initial state");

  DenseTrajectory traj;
  traj.times_.push_back(t0);
  traj.states_.push_back(y0);
  if (t0 == t1) return traj;

  const double span = std::abs(t1 - t0);
  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double h_min = 1e-14 * span;

  auto scale = [&](const Vector& a, const Vector& b) {
    return (opt.atol + opt.rtol * a.cwiseAbs().cwiseMax(b.cwiseAbs()).array()).matrix().eval();
  };

  Vector y = y0;
  double t = t0;
  Vector k1 = field(t, y);

  // Initial step guess (Hairer, Norsett & Wanner, II.4).
  double h;
  {
    const Vector sc = scale(y, y);
    const double dn0 = detail::rms_scaled(y, sc);
    const double dn1 = detail::rms_scaled(k1, sc);
    double h0 = (dn0 < 1e-5 || dn1 < 1e-5) ? 1e-6 * span : 0.01 * dn0 / dn1;
    h0 = std::min(h0, span);
    const Vector y1 = y + dir * h0 * k1;
    const Vector f1 = field(t + dir * h0, y1);
    const double dn2 = detail::rms_scaled(f1 - k1, sc) / h0;
    const double dmax = std::max(dn1, dn2);
    const double h1 = dmax <= 1e-15 ? std::max(1e-6 * span, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
    h = std::min({100.0 * h0, h1, span});
  }

  bool last_rejected = false;
  std::size_t steps = 0;
  while (dir * (t1 - t) > 0.0) {
    if (++steps > opt.max_steps) throw IntegrationError("integrate: step budget exhausted");
    if (h < h_min) {
      throw IntegrationError("integrate: step size underflow at t = " + std::to_string(t) +
                             " (stiffness or blow-up)");
    }
    bool final_step = false;
    if (h >= std::abs(t1 - t)) {
      h = std::abs(t1 - t);
      final_step = true;
    }
    const double hs = dir * h;

    const Vector k2 = field(t + c2 * hs, y + hs * (a21 * k1));
    const Vector k3 = field(t + c3 * hs, y + hs * (a31 * k1 + a32 * k2));
    const Vector k4 = field(t + c4 * hs, y + hs * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vector k5 = field(t + c5 * hs, y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vector k6 =
        field(t + hs, y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Vector y_new = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const double t_new = final_step ? t1 : t + hs;
    const Vector k7 = field(t_new, y_new);

    const Vector err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double err_norm = detail::rms_scaled(err, scale(y, y_new));
    if (!std::isfinite(err_norm) || !y_new.allFinite()) {
      h *= 0.2;
      last_rejected = true;
      continue;
    }

    double factor = err_norm == 0.0 ? 5.0 : 0.9 * std::pow(err_norm, -0.2);
    factor = std::clamp(factor, 0.2, 5.0);

    if (err_norm <= 1.0) {
      Matrix r(y.size(), 5);
      r.col(0) = y;
      r.col(1) = y_new - y;
      r.col(2) = hs * k1 - r.col(1);
      r.col(3) = r.col(1) - hs * k7 - r.col(2);
      r.col(4) = hs * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
      traj.coeffs_.push_back(std::move(r));
      traj.times_.push_back(t_new);
      traj.states_.push_back(y_new);
      t = t_new;
      y = y_new;
      k1 = k7;
      if (last_rejected) factor = std::min(factor, 1.0);
      last_rejected = false;
      if (final_step) break;
    } else {
      last_rejected = true;
    }
    h *= factor;
  }
  return traj;
}

/// Integrates a matrix-valued integrand over [t0, t1] by augmenting Y' = integrand(t), Y(t0) = 0.
inline Matrix quadrature(const std::function<Matrix(double)>& integrand, double t0, double t1,
                         const OdeOptions& opt = {}) {
  const Matrix probe = integrand(t0);
  const Eigen::Index rows = probe.rows();
  const Eigen::Index cols = probe.cols();
  VectorField field = [&](double t, const Vector&) -> Vector {
    const Matrix m = integrand(t);
    return Eigen::Map<const Vector>(m.data(), m.size());
  };
  const DenseTrajectory traj = integrate(field, Vector::Zero(rows * cols), t0, t1, opt);
  const Vector& last = traj.states().back();
  return Eigen::Map<const Matrix>(last.data(), rows, cols);
}

/// Scalar convenience wrapper around `quadrature`.
inline double quadrature_scalar(const std::function<double(double)>& integrand, double t0, double t1,
                                const OdeOptions& opt = {}) {
  return quadrature([&](double t) { return Matrix::Constant(1, 1, integrand(t)); }, t0, t1, opt)(0, 0);
}

inline Vector flatten(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

inline Matrix unflatten(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

}  // namespace gspline
