#pragma once

// Problem (P) over a whole partition: pinning the state at every knot splits
// it into independent segment problems, solved one by one and concatenated.

#include <cmath>
#include <cstddef>
#include <future>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "gspline/errors.hpp"
#include "gspline/linalg.hpp"
#include "gspline/lqsegment.hpp"
#include "gspline/matrix_function.hpp"
#include "gspline/operator.hpp"
#include "gspline/transition.hpp"

namespace gspline {

struct ProblemP {
  MatrixFunction a;
  MatrixFunction b;
  std::vector<double> knots;
  std::vector<Vector> waypoints;

  std::size_t dimension() const { return a.rows(); }
  std::size_t segments() const { return knots.empty() ? 0 : knots.size() - 1; }
};

/// Throws std::invalid_argument / DimensionError when the problem is malformed.
inline void validate(const ProblemP& p) {
  const std::size_t n = p.a.rows();
  if (n == 0 || p.a.cols() != n) throw DimensionError("problem: A must be a nonempty square matrix");
  if (p.b.rows() != n || p.b.cols() != n) throw DimensionError("problem: B must be n x n");
  if (p.knots.size() < 2) throw std::invalid_argument("problem: need at least two knots");
  for (std::size_t i = 0; i + 1 < p.knots.size(); ++i) {
    if (!(p.knots[i] < p.knots[i + 1])) {
      throw std::invalid_argument("problem: knots must be strictly increasing (t_" + std::to_string(i) +
                                  " >= t_" + std::to_string(i + 1) + ")");
    }
  }
  if (p.waypoints.size() != p.knots.size()) throw DimensionError("problem: one waypoint per knot required");
  for (const auto& w : p.waypoints) {
    if (static_cast<std::size_t>(w.size()) != n) throw DimensionError("problem: waypoint dimension differs from n");
  }
}

struct HypothesisReport {
  bool b_full_rank = true;     // H1
  bool controllable = true;    // H2
  bool c1_coefficients = true; // H3
  Matrix w;
  std::string detail;

  bool ok() const { return b_full_rank && controllable && c1_coefficients; }
  /// Name of the first failed hypothesis, or empty.
  std::string failed() const {
    if (!b_full_rank) return "H1";
    if (!controllable) return "H2";
    if (!c1_coefficients) return "H3";
    return "";
  }
};

/// Samples B for full rank, A, B and their derivatives for finiteness, and
/// computes W on [t_0, t_m].
inline HypothesisReport check_hypotheses(const ProblemP& p, std::size_t samples = 100, const OdeOptions& opt = {}) {
  HypothesisReport r;
  const double t0 = p.knots.front(), t1 = p.knots.back();
  const MatrixFunction da = p.a.derivative(), db = p.b.derivative();
  for (std::size_t k = 0; k <= samples; ++k) {
    const double t = t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(samples);
    try {
      if (!(p.a.eval(t).allFinite() && p.b.eval(t).allFinite() && da.eval(t).allFinite() &&
            db.eval(t).allFinite())) {
        throw DomainError("non-finite value");
      }
    } catch (const DomainError& e) {
      if (r.c1_coefficients) r.detail += "H3: coefficients not C1 at t = " + std::to_string(t) + " (" + e.what() + "); ";
      r.c1_coefficients = false;
      continue;
    }
    try {
      LuFactor lu(p.b.eval(t));
    } catch (const SingularMatrixError&) {
      if (r.b_full_rank) r.detail += "H1: B(t) singular at t = " + std::to_string(t) + "; ";
      r.b_full_rank = false;
    }
  }
  if (!r.c1_coefficients) return r;
  const auto w = controllability_gramian_w(p.a, p.b, t0, t1, opt);
  r.w = w.w;
  r.controllable = w.controllable;
  if (!r.controllable) r.detail += "H2: controllability Gramian on [t_0, t_m] is not positive definite; ";
  return r;
}

struct SolveOptions {
  SegmentOptions segment;
  bool check_hypotheses = true;
  std::size_t hypothesis_samples = 100;
  bool parallel = false;
};

class GeneralizedSpline {
 public:
  const std::vector<SegmentSolution>& segments() const { return segments_; }
  const SegmentSolution& segment(std::size_t i) const { return segments_.at(i); }
  const std::vector<double>& knots() const { return knots_; }
  std::size_t dimension() const { return segments_.front().problem().a.rows(); }
  const HypothesisReport& hypotheses() const { return hyp_; }

  double total_cost() const {
    double c = 0.0;
    for (const auto& s : segments_) c += s.cost();
    return c;
  }

  /// Segment used at t: interior knots belong to the segment on their left.
  std::size_t segment_of(double t) const {
    if (t < knots_.front() || t > knots_.back()) throw std::out_of_range("spline: t outside [t_0, t_m]");
    const auto it = std::lower_bound(knots_.begin() + 1, knots_.end() - 1, t);
    return static_cast<std::size_t>(it - knots_.begin()) - 1;
  }
  /// Segment used for right limits at t.
  std::size_t segment_right_of(double t) const {
    if (t < knots_.front() || t > knots_.back()) throw std::out_of_range("spline: t outside [t_0, t_m]");
    const auto it = std::upper_bound(knots_.begin() + 1, knots_.end() - 1, t);
    return static_cast<std::size_t>(it - knots_.begin()) - 1;
  }

  Vector x(double t) const { return segments_[segment_of(t)].x(t); }
  Vector u(double t) const { return u_left(t); }
  Vector psi(double t) const { return psi_left(t); }
  Vector u_left(double t) const { return segments_[segment_of(t)].u(t); }
  Vector u_right(double t) const { return segments_[segment_right_of(t)].u(t); }
  Vector psi_left(double t) const { return segments_[segment_of(t)].psi(t); }
  Vector psi_right(double t) const { return segments_[segment_right_of(t)].psi(t); }

  /// Copy with segment i's costate scaled by `psi_scale`, state re-integrated.
  GeneralizedSpline with_fault(std::size_t i, double psi_scale, const OdeOptions& opt = {}) const {
    GeneralizedSpline out = *this;
    SegmentSolution& s = out.segments_.at(i);
    s = s.with_costate(psi_scale * s.costate_initial(), opt);
    return out;
  }

 private:
  friend GeneralizedSpline solve_problem_p(const ProblemP&, const SolveOptions&);

  std::vector<double> knots_;
  std::vector<SegmentSolution> segments_;
  HypothesisReport hyp_;
};

namespace detail {

inline SegmentSolution solve_indexed_segment(const ProblemP& p, std::size_t i, const SegmentOptions& opt) {
  const SegmentProblem sp{p.a, p.b, p.knots[i], p.knots[i + 1], p.waypoints[i], p.waypoints[i + 1]};
  try {
    return solve_segment(sp, opt);
  } catch (const HypothesisError& e) {
    throw HypothesisError(e.hypothesis(), "segment " + std::to_string(i) + ": " + e.what());
  } catch (const std::exception& e) {
    throw SegmentError(i, e.what());
  }
}

}  // namespace detail

inline GeneralizedSpline solve_problem_p(const ProblemP& p, const SolveOptions& opt = {}) {
  validate(p);
  GeneralizedSpline out;
  out.knots_ = p.knots;
  if (opt.check_hypotheses) {
    out.hyp_ = check_hypotheses(p, opt.hypothesis_samples, opt.segment.ode);
    if (!out.hyp_.ok()) throw HypothesisError(out.hyp_.failed(), out.hyp_.detail);
  }
  const std::size_t m = p.segments();
  if (opt.parallel) {
    std::vector<std::future<SegmentSolution>> jobs;
    for (std::size_t i = 0; i < m; ++i) {
      jobs.push_back(std::async(std::launch::async, detail::solve_indexed_segment, std::cref(p), i,
                                std::cref(opt.segment)));
    }
    for (auto& j : jobs) out.segments_.push_back(j.get());
  } else {
    for (std::size_t i = 0; i < m; ++i) out.segments_.push_back(detail::solve_indexed_segment(p, i, opt.segment));
  }
  return out;
}

/// Sum over segments of the quadrature of |B u|^2.
inline double cost_quadrature(const GeneralizedSpline& s, const OdeOptions& opt = {}) {
  double c = 0.0;
  for (const auto& seg : s.segments()) c += segment_cost_quadrature(seg, opt);
  return c;
}

struct Profile {
  std::string name;
  double interpolation;
  double maximality;
  double costate;
  double euler_lagrange;
  double cost;
};

inline Profile profile(const std::string& name) {
  const Profile strict{"strict", 1e-7, 1e-8, 1e-7, 1e-5, 1e-7};
  auto scaled = [&](const std::string& nm, double f) {
    return Profile{nm, f * strict.interpolation, f * strict.maximality, f * strict.costate,
                   f * strict.euler_lagrange, f * strict.cost};
  };
  if (name == "strict") return strict;
  if (name == "default") return scaled("default", 10.0);
  if (name == "loose") return scaled("loose", 1000.0);
  throw std::invalid_argument("unknown tolerance profile '" + name + "' (strict, default, loose)");
}

struct SegmentResiduals {
  double interpolation = 0.0;
  double maximality = 0.0;
  double costate = 0.0;
  double euler_lagrange = 0.0;
  double cost = 0.0;
};

struct VerificationReport {
  Profile limits;
  std::vector<SegmentResiduals> segments;

  bool passed(std::size_t i) const {
    const auto& r = segments.at(i);
    return r.interpolation <= limits.interpolation && r.maximality <= limits.maximality &&
           r.costate <= limits.costate && r.euler_lagrange <= limits.euler_lagrange && r.cost <= limits.cost;
  }
  bool passed() const {
    for (std::size_t i = 0; i < segments.size(); ++i) {
      if (!passed(i)) return false;
    }
    return true;
  }
};

/// Residual maxima over `samples` + 1 uniform points per segment (endpoints included).
/// The Euler-Lagrange residual applies the exact L*L coefficients to x, the
/// integrator's x' and x'' = A_dot x + A x' + psi'.
inline VerificationReport verify(const GeneralizedSpline& s, const ProblemP& p, const Profile& limits,
                                 std::size_t samples = 50, const OdeOptions& opt = {}) {
  VerificationReport rep{limits, {}};
  const auto l = LinearDiffOperator::from_coefficients(Convention::matrix, {p.a});
  const auto ll = compose(adjoint(l), l);
  const MatrixFunction da = p.a.derivative();
  auto bad = [](double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::infinity(); };
  for (std::size_t i = 0; i < s.segments().size(); ++i) {
    const SegmentSolution& seg = s.segment(i);
    SegmentResiduals r;
    r.interpolation = std::max((seg.x(seg.t0()) - p.waypoints[i]).norm(), (seg.x(seg.t1()) - p.waypoints[i + 1]).norm());
    for (std::size_t k = 0; k <= samples; ++k) {
      const double t = seg.t0() + (seg.t1() - seg.t0()) * static_cast<double>(k) / static_cast<double>(samples);
      const Matrix a = p.a.eval(t);
      const Matrix b = p.b.eval(t);
      const Vector x = seg.x(t);
      const Vector psi = seg.psi(t);
      const Vector psi_dot = seg.psi_dot(t);
      r.maximality = std::max(r.maximality, bad((psi - b * seg.u(t)).norm()));
      r.costate = std::max(r.costate, bad((psi_dot + a.transpose() * psi).norm()));
      const Vector xd = seg.state_trajectory().derivative(t);
      const Vector xdd = da.eval(t) * x + a * xd + psi_dot;
      const std::vector<Vector> d = {x, xd, xdd};
      r.euler_lagrange = std::max(r.euler_lagrange, bad(ll.apply(d, t).norm()));
    }
    r.cost = bad(std::abs(seg.cost() - segment_cost_quadrature(seg, opt)));
    r.interpolation = bad(r.interpolation);
    rep.segments.push_back(r);
  }
  return rep;
}

}  // namespace gspline
