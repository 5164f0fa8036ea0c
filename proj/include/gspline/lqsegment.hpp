#pragma once

// Closed-form minimizer of one segment problem
//
//   min  int_{t_i}^{t_{i+1}} |B(t) u(t)|^2 dt
//   s.t. x' = A(t) x + B(t) u,  x(t_i) = x_i,  x(t_{i+1}) = x_{i+1}.
//
// With the normal multiplier fixed at -1/2 the maximum principle gives
// psi = B u and psi' = -A' psi, so psi(t) = Phi(t_i, t)' psi_i with
// psi_i = S^{-1} (Phi(t_i, t_{i+1}) x_{i+1} - x_i).

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

#include "gspline/errors.hpp"
#include "gspline/linalg.hpp"
#include "gspline/matrix_function.hpp"
#include "gspline/ode.hpp"
#include "gspline/transition.hpp"

namespace gspline {

struct SegmentProblem {
  MatrixFunction a;
  MatrixFunction b;
  double t0 = 0.0;
  double t1 = 1.0;
  Vector x0;
  Vector x1;
};

struct SegmentOptions {
  OdeOptions ode;
  /// B(t) must be nonsingular on the integrator mesh and on a uniform grid of
  /// this many subintervals (endpoints included).
  std::size_t b_check_samples = 100;
};

class SegmentSolution {
 public:
  const SegmentProblem& problem() const { return problem_; }
  double t0() const { return problem_.t0; }
  double t1() const { return problem_.t1; }
  const TransitionOperator& transition() const { return *transition_; }
  const Matrix& gramian() const { return s_; }
  /// psi(t_i).
  const Vector& costate_initial() const { return psi0_; }
  /// Phi(t_i, t_{i+1}) x_{i+1} - x_i.
  const Vector& boundary_gap() const { return gap_; }
  /// gap' S^{-1} gap.
  double cost() const { return cost_; }
  const DenseTrajectory& state_trajectory() const { return state_; }

  Vector x(double t) const { return state_(t); }
  /// A(t) x(t) + psi(t), the state equation evaluated on the realized pair.
  Vector x_dot(double t) const { return problem_.a.eval(t) * x(t) + psi(t); }
  Vector psi(double t) const { return transition_->to_base(t).transpose() * psi0_; }
  Vector psi_dot(double t) const { return transition_->to_base_derivative(t).transpose() * psi0_; }
  Vector u(double t) const { return lu_solve(problem_.b.eval(t), psi(t)); }

  /// Re-realizes the state for an arbitrary initial costate (fault injection, tests).
  SegmentSolution with_costate(const Vector& psi0, const OdeOptions& opt = {}) const {
    SegmentSolution out = *this;
    out.psi0_ = psi0;
    out.realize_state(opt);
    return out;
  }

 private:
  friend SegmentSolution solve_segment(const SegmentProblem&, const SegmentOptions&);

  void realize_state(const OdeOptions& opt) {
    const TransitionOperator* op = transition_.get();
    const Vector psi0 = psi0_;
    const MatrixFunction a = problem_.a;
    state_ = integrate(
        [op, psi0, a](double t, const Vector& x) -> Vector {
          return a.eval(t) * x + op->to_base(t).transpose() * psi0;
        },
        problem_.x0, problem_.t0, problem_.t1, opt);
  }

  SegmentProblem problem_;
  std::shared_ptr<const TransitionOperator> transition_;
  Matrix s_;
  Vector gap_;
  Vector psi0_;
  double cost_ = 0.0;
  DenseTrajectory state_;
};

namespace detail {

inline void check_b_nonsingular(const MatrixFunction& b, double t0, double t1,
                                const std::vector<double>& mesh, std::size_t samples) {
  auto check = [&](double t) {
    try {
      LuFactor lu(b.eval(t));
    } catch (const SingularMatrixError& e) {
      throw HypothesisError("H1", "B(t) singular at t = " + std::to_string(t) + " (" + e.what() + ")");
    }
  };
  for (double t : mesh) check(t);
  if (samples == 0) return;
  for (std::size_t k = 0; k <= samples; ++k) {
    check(t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(samples));
  }
}

}  // namespace detail

inline SegmentSolution solve_segment(const SegmentProblem& p, const SegmentOptions& opt = {}) {
  const std::size_t n = p.a.rows();
  if (p.a.cols() != n || p.b.rows() != n || p.b.cols() != n) {
    throw DimensionError("segment: A and B must both be n x n");
  }
  if (static_cast<std::size_t>(p.x0.size()) != n || static_cast<std::size_t>(p.x1.size()) != n) {
    throw DimensionError("segment: endpoint dimension differs from n");
  }
  if (!(p.t0 < p.t1)) throw std::invalid_argument("segment: requires t0 < t1");

  SegmentSolution sol;
  sol.problem_ = p;
  sol.transition_ = std::make_shared<const TransitionOperator>(p.a, p.t0, p.t1, opt.ode);
  detail::check_b_nonsingular(p.b, p.t0, p.t1, sol.transition_->forward_trajectory().mesh(),
                              opt.b_check_samples);

  sol.s_ = gramian_s(*sol.transition_, p.t0, p.t1, opt.ode);
  sol.gap_ = sol.transition_->to_base(p.t1) * p.x1 - p.x0;
  const Eigen::LLT<Matrix> llt(sol.s_);
  if (llt.info() != Eigen::Success) throw NumericalFailure("segment: factorization of S failed");
  sol.psi0_ = llt.solve(sol.gap_);
  sol.cost_ = sol.gap_.dot(sol.psi0_);
  sol.realize_state(opt.ode);
  return sol;
}

/// int |B(t) u(t)|^2 dt over the segment by adaptive quadrature.
inline double segment_cost_quadrature(const SegmentSolution& s, const OdeOptions& opt = {}) {
  return quadrature_scalar(
      [&](double t) {
        const Vector bu = s.problem().b.eval(t) * s.u(t);
        return bu.squaredNorm();
      },
      s.t0(), s.t1(), opt);
}

/// Cost of the admissible pair obtained by adding
///   eta(t) = sin(pi tau) (w0 + w1 sin(2 pi tau)),  tau = (t - t_i) / (t_{i+1} - t_i)
/// to the optimal state and recovering u = B^{-1}(x' - A x).
inline double perturbed_cost(const SegmentSolution& s, const Vector& w0, const Vector& w1,
                             const OdeOptions& opt = {}) {
  const double t0 = s.t0();
  const double dt = s.t1() - s.t0();
  constexpr double pi = std::numbers::pi;
  const SegmentProblem& p = s.problem();
  return quadrature_scalar(
      [&](double t) {
        const double tau = (t - t0) / dt;
        const double s1 = std::sin(pi * tau);
        const double c1 = std::cos(pi * tau);
        const double s2 = std::sin(2 * pi * tau);
        const double c2 = std::cos(2 * pi * tau);
        const Vector eta = s1 * (w0 + s2 * w1);
        const Vector eta_dot = (pi / dt) * c1 * (w0 + s2 * w1) + s1 * (2 * pi / dt) * c2 * w1;
        const Vector x = s.x(t) + eta;
        const Vector x_dot = s.x_dot(t) + eta_dot;
        const Matrix b = p.b.eval(t);
        const Vector u = lu_solve(b, Vector(x_dot - p.a.eval(t) * x));
        return (b * u).squaredNorm();
      },
      t0, s.t1(), opt);
}

struct PerturbationReport {
  std::size_t trials = 0;
  std::size_t violations = 0;
  double optimal_cost = 0.0;
  double min_perturbed_cost = std::numeric_limits<double>::infinity();
  /// Largest amount by which a perturbed cost undercut the optimum (<= 0 when none did).
  double worst_decrease = -std::numeric_limits<double>::infinity();
  std::vector<double> costs;
  bool ok() const { return violations == 0; }
};

/// Draws `trials` seeded random endpoint-vanishing perturbations and checks
/// none of them lowers the cost by more than 1e-7 (1 + cost).
inline PerturbationReport perturbation_check(const SegmentSolution& s, std::size_t trials,
                                             std::uint64_t seed, double amplitude = 0.1,
                                             const OdeOptions& opt = {}) {
  PerturbationReport rep;
  rep.trials = trials;
  rep.optimal_cost = s.cost();
  const double tol = 1e-7 * (1.0 + s.cost());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, amplitude);
  const auto n = static_cast<Eigen::Index>(s.problem().a.rows());
  for (std::size_t k = 0; k < trials; ++k) {
    Vector w0(n), w1(n);
    for (Eigen::Index i = 0; i < n; ++i) w0[i] = gauss(rng);
    for (Eigen::Index i = 0; i < n; ++i) w1[i] = gauss(rng);
    const double c = perturbed_cost(s, w0, w1, opt);
    rep.costs.push_back(c);
    rep.min_perturbed_cost = std::min(rep.min_perturbed_cost, c);
    rep.worst_decrease = std::max(rep.worst_decrease, s.cost() - c);
    if (c < s.cost() - tol) ++rep.violations;
  }
  return rep;
}

}  // namespace gspline
