#pragma once

// Problem-file loading and the solve / verify / controllability commands.
// Kept in a header so the tests can drive the commands in-process.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gspline/bvpspline.hpp"
#include "gspline/errors.hpp"
#include "gspline/lqsegment.hpp"
#include "gspline/operator.hpp"
#include "gspline/spline.hpp"
#include "gspline/transition.hpp"

namespace gspline::cli {

using json = nlohmann::json;

enum ExitCode { kOk = 0, kCheckFailed = 1, kInputError = 2, kSolverFailure = 3, kHypothesisViolation = 4 };

/// Schema or syntax problem in a problem file; maps to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Fault {
  std::size_t segment = 0;
  double psi_scale = 1.0;
};

struct ProblemFile {
  std::string mode;  // "lq", "scalar-spline" or "vector-spline"
  std::size_t dimension = 0;
  std::string profile = "default";
  std::size_t samples = 200;
  ProblemP lq;
  std::optional<SplineSpec> spline;
  std::optional<Fault> fault;
};

struct Options {
  std::string path;
  std::string output_dir = ".";
  std::optional<std::string> profile;
  std::optional<std::size_t> samples;
  std::uint64_t seed = 0;
  bool skip_hypotheses = false;
  std::optional<double> t0, t1;
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

[[noreturn]] inline void fail(const std::string& field, const std::string& what) {
  throw InputError("field '" + field + "': " + what);
}

inline const json& require(const json& obj, const std::string& key, const std::string& path = "") {
  const std::string field = path.empty() ? key : path + "." + key;
  if (!obj.contains(key)) fail(field, "missing");
  return obj.at(key);
}

inline double number(const json& v, const std::string& field) {
  if (!v.is_number()) fail(field, "expected a number");
  return v.get<double>();
}

inline std::size_t count(const json& v, const std::string& field) {
  if (!v.is_number_integer() || v.get<long long>() < 0) fail(field, "expected a non-negative integer");
  return v.get<std::size_t>();
}

inline const json& array(const json& v, const std::string& field) {
  if (!v.is_array()) fail(field, "expected an array");
  return v;
}

inline TimeExpr expression(const json& v, const std::string& field) {
  if (v.is_number()) return TimeExpr::constant(v.get<double>());
  if (!v.is_string()) fail(field, "expected an expression string");
  try {
    return parse(v.get<std::string>());
  } catch (const ParseError& e) {
    fail(field, e.what());
  }
}

inline MatrixFunction matrix(const json& v, std::size_t n, const std::string& field) {
  array(v, field);
  if (v.size() != n) fail(field, "expected " + std::to_string(n) + " rows, got " + std::to_string(v.size()));
  MatrixFunction m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string row = field + "[" + std::to_string(i) + "]";
    array(v[i], row);
    if (v[i].size() != n) fail(row, "expected " + std::to_string(n) + " entries, got " + std::to_string(v[i].size()));
    for (std::size_t j = 0; j < n; ++j) m(i, j) = expression(v[i][j], row + "[" + std::to_string(j) + "]");
  }
  return m;
}

/// A vector of length n; a bare number is accepted when n == 1.
inline Vector vector(const json& v, std::size_t n, const std::string& field) {
  if (n == 1 && v.is_number()) return Vector::Constant(1, v.get<double>());
  array(v, field);
  if (v.size() != n) fail(field, "expected " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
  Vector out(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) out[static_cast<Eigen::Index>(i)] = number(v[i], field + "[" + std::to_string(i) + "]");
  return out;
}

inline std::vector<Vector> vectors(const json& v, std::size_t n, const std::string& field) {
  array(v, field);
  std::vector<Vector> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(vector(v[i], n, field + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::vector<double> knots(const json& v) {
  array(v, "knots");
  if (v.size() < 2) fail("knots", "at least two knots are required");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], "knots[" + std::to_string(i) + "]"));
  for (std::size_t i = 0; i + 1 < out.size(); ++i) {
    if (!(out[i] < out[i + 1])) {
      fail("knots", "knots must be strictly increasing, but knots[" + std::to_string(i) + "] = " +
                        format_double(out[i]) + " >= knots[" + std::to_string(i + 1) + "] = " + format_double(out[i + 1]));
    }
  }
  return out;
}

inline LinearDiffOperator spline_operator(const json& op, const std::string& mode, std::size_t n) {
  const std::size_t p = count(require(op, "order", "operator"), "operator.order");
  if (p == 0) fail("operator.order", "must be at least 1");
  Convention conv = mode == "scalar-spline" ? Convention::scalar : Convention::matrix;
  if (op.contains("convention")) {
    const json& c = op.at("convention");
    if (c == "scalar") {
      conv = Convention::scalar;
    } else if (c == "matrix") {
      conv = Convention::matrix;
    } else {
      fail("operator.convention", "expected \"scalar\" or \"matrix\"");
    }
  }
  const json& coeffs = array(require(op, "coefficients", "operator"), "operator.coefficients");
  if (coeffs.size() != p) {
    fail("operator.coefficients", "expected " + std::to_string(p) + " coefficients (D^0 .. D^" +
                                      std::to_string(p - 1) + "), got " + std::to_string(coeffs.size()));
  }
  std::vector<MatrixFunction> lower;
  for (std::size_t k = 0; k < p; ++k) {
    const std::string field = "operator.coefficients[" + std::to_string(k) + "]";
    if (mode == "scalar-spline") {
      MatrixFunction m(1, 1);
      m(0, 0) = expression(coeffs[k], field);
      lower.push_back(m);
    } else {
      lower.push_back(matrix(coeffs[k], n, field));
    }
  }
  return LinearDiffOperator::from_coefficients(conv, lower, n);
}

}  // namespace detail

/// Parses and validates a problem file. `source` names the file in messages.
inline ProblemFile parse_problem(const std::string& text, const std::string& source = "<input>") {
  using namespace detail;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(source + ": JSON syntax error at " + line_col(text, e.byte == 0 ? 0 : e.byte - 1) + ": " +
                     e.what());
  }
  if (!doc.is_object()) throw InputError(source + ": top level must be a JSON object");
  try {
    ProblemFile pf;
    const json& mode = require(doc, "mode");
    if (!mode.is_string()) fail("mode", "expected a string");
    pf.mode = mode.get<std::string>();
    if (pf.mode != "lq" && pf.mode != "scalar-spline" && pf.mode != "vector-spline") {
      fail("mode", "expected \"lq\", \"scalar-spline\" or \"vector-spline\", got \"" + pf.mode + "\"");
    }
    if (pf.mode == "scalar-spline") {
      pf.dimension = doc.contains("dimension") ? count(doc.at("dimension"), "dimension") : 1;
      if (pf.dimension != 1) fail("dimension", "scalar-spline mode requires dimension 1");
    } else {
      pf.dimension = count(require(doc, "dimension"), "dimension");
      if (pf.dimension == 0) fail("dimension", "must be at least 1");
    }
    const std::size_t n = pf.dimension;
    if (doc.contains("profile")) {
      if (!doc.at("profile").is_string()) fail("profile", "expected a string");
      pf.profile = doc.at("profile").get<std::string>();
      try {
        (void)profile(pf.profile);
      } catch (const std::invalid_argument& e) {
        fail("profile", e.what());
      }
    }
    if (doc.contains("samples")) {
      pf.samples = count(doc.at("samples"), "samples");
      if (pf.samples == 0) fail("samples", "must be at least 1");
    }
    const std::vector<double> tk = knots(require(doc, "knots"));

    if (pf.mode == "lq") {
      pf.lq.a = matrix(require(doc, "A"), n, "A");
      pf.lq.b = matrix(require(doc, "B"), n, "B");
      pf.lq.knots = tk;
      pf.lq.waypoints = vectors(require(doc, "waypoints"), n, "waypoints");
      if (pf.lq.waypoints.size() != tk.size()) {
        fail("waypoints", "expected one waypoint per knot (" + std::to_string(tk.size()) + "), got " +
                              std::to_string(pf.lq.waypoints.size()));
      }
      if (doc.contains("fault")) {
        const json& f = doc.at("fault");
        Fault fault;
        fault.segment = count(require(f, "segment", "fault"), "fault.segment");
        fault.psi_scale = number(require(f, "psi_scale", "fault"), "fault.psi_scale");
        if (fault.segment + 1 >= tk.size()) fail("fault.segment", "no such segment");
        pf.fault = fault;
      }
      validate(pf.lq);
    } else {
      const LinearDiffOperator l = spline_operator(require(doc, "operator"), pf.mode, n);
      const std::size_t p = l.order();
      SplineSpec spec{l, tk, vectors(require(doc, "values"), n, "values"), {}, {}};
      if (spec.values.size() != tk.size()) {
        fail("values", "expected one value per knot (" + std::to_string(tk.size()) + "), got " +
                           std::to_string(spec.values.size()));
      }
      if (p > 1 || doc.contains("boundary")) {
        const json& bnd = require(doc, "boundary");
        spec.left_derivatives = vectors(require(bnd, "left", "boundary"), n, "boundary.left");
        spec.right_derivatives = vectors(require(bnd, "right", "boundary"), n, "boundary.right");
        for (const auto* side : {&spec.left_derivatives, &spec.right_derivatives}) {
          if (side->size() != p - 1) {
            fail(side == &spec.left_derivatives ? "boundary.left" : "boundary.right",
                 "expected derivatives of orders 1.." + std::to_string(p - 1) + " (" + std::to_string(p - 1) +
                     " entries), got " + std::to_string(side->size()));
          }
        }
      }
      pf.spline = spec;
    }
    return pf;
  } catch (const InputError& e) {
    throw InputError(source + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError(source + ": " + e.what());
  }
}

inline ProblemFile load_problem(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path + ": cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_problem(ss.str(), path);
}

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
}

inline std::vector<double> grid(double a, double b, std::size_t samples) {
  std::vector<double> ts;
  for (std::size_t k = 0; k <= samples; ++k) {
    ts.push_back(k == samples ? b : a + (b - a) * static_cast<double>(k) / static_cast<double>(samples));
  }
  return ts;
}

inline void append_row(std::string& csv, double t, const std::vector<const Vector*>& parts, std::size_t segment) {
  csv += format_double(t);
  for (const Vector* v : parts) {
    for (Eigen::Index i = 0; i < v->size(); ++i) csv += "," + format_double((*v)[i]);
  }
  csv += "," + std::to_string(segment) + "\n";
}

inline std::string lq_csv(const GeneralizedSpline& s, std::size_t samples) {
  const std::size_t n = s.dimension();
  std::string csv = "t";
  for (const char* name : {"x", "u", "psi"}) {
    for (std::size_t i = 1; i <= n; ++i) csv += std::string(",") + name + "_" + std::to_string(i);
  }
  csv += ",segment\n";
  // Each segment's grid includes both of its knots, so interior knots appear
  // twice: left limits from the earlier segment, right limits from the later.
  for (std::size_t i = 0; i < s.segments().size(); ++i) {
    const SegmentSolution& seg = s.segment(i);
    for (double t : grid(seg.t0(), seg.t1(), samples)) {
      const Vector x = seg.x(t), u = seg.u(t), psi = seg.psi(t);
      append_row(csv, t, {&x, &u, &psi}, i);
    }
  }
  return csv;
}

inline std::string spline_csv(const PiecewiseSpline& s, std::size_t samples) {
  const std::size_t n = s.dimension();
  const std::size_t top = 2 * s.order() - 1;
  std::string csv = "t";
  for (std::size_t k = 0; k <= top; ++k) {
    for (std::size_t i = 1; i <= n; ++i) {
      csv += "," + (k == 0 ? std::string() : "d" + std::to_string(k)) + "s_" + std::to_string(i);
    }
  }
  csv += ",segment\n";
  for (std::size_t i = 0; i < s.intervals(); ++i) {
    for (double t : grid(s.knots()[i], s.knots()[i + 1], samples)) {
      const Vector z = s.state(i, t);
      append_row(csv, t, {&z}, i);
    }
  }
  return csv;
}

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

}  // namespace detail

/// Exit code for an exception escaping a command.
inline int report_exception(std::ostream& err, const std::string& cmd) {
  try {
    throw;
  } catch (const InputError& e) {
    err << cmd << ": input error: " << e.what() << "\n";
    return kInputError;
  } catch (const HypothesisError& e) {
    err << cmd << ": hypothesis " << e.hypothesis() << " violated: " << e.what() << "\n";
    return kHypothesisViolation;
  } catch (const std::exception& e) {
    err << cmd << ": solver failure: " << e.what() << "\n";
    return kSolverFailure;
  }
}

inline ProblemFile load_with_overrides(const Options& opt) {
  ProblemFile pf = load_problem(opt.path);
  if (opt.profile) {
    try {
      (void)profile(*opt.profile);
    } catch (const std::invalid_argument& e) {
      throw InputError(std::string("--profile: ") + e.what());
    }
    pf.profile = *opt.profile;
  }
  if (opt.samples) {
    if (*opt.samples == 0) throw InputError("--samples: must be at least 1");
    pf.samples = *opt.samples;
  }
  return pf;
}

inline int run_solve(const Options& opt, std::ostream& out, std::ostream& err) {
  try {
    const ProblemFile pf = load_with_overrides(opt);
    const std::filesystem::path dir(opt.output_dir);
    json summary;
    summary["mode"] = pf.mode;
    summary["dimension"] = pf.dimension;
    std::string csv;
    if (pf.mode == "lq") {
      SolveOptions so;
      so.check_hypotheses = !opt.skip_hypotheses;
      const GeneralizedSpline s = solve_problem_p(pf.lq, so);
      csv = detail::lq_csv(s, pf.samples);
      json segs = json::array();
      for (std::size_t i = 0; i < s.segments().size(); ++i) {
        segs.push_back({{"index", i}, {"t0", s.segment(i).t0()}, {"t1", s.segment(i).t1()}, {"cost", s.segment(i).cost()}});
      }
      summary["segments"] = segs;
      summary["total_cost"] = s.total_cost();
      if (opt.skip_hypotheses) {
        summary["hypotheses"] = "skipped";
      } else {
        const auto& h = s.hypotheses();
        summary["hypotheses"] = {{"H1", h.b_full_rank}, {"H2", h.controllable}, {"H3", h.c1_coefficients}};
        summary["controllable"] = h.controllable;
      }
      out << "solved " << s.segments().size() << " segments, total cost " << format_double(s.total_cost()) << "\n";
    } else {
      const PiecewiseSpline s = solve_spline(*pf.spline);
      csv = detail::spline_csv(s, pf.samples);
      const LinearDiffOperator& l = pf.spline->l;
      json segs = json::array();
      double total = 0.0;
      for (std::size_t i = 0; i < s.intervals(); ++i) {
        const double e = quadrature_scalar(
            [&](double t) { return l.apply(s.derivatives(i, t, l.order()), t).squaredNorm(); }, s.knots()[i],
            s.knots()[i + 1]);
        total += e;
        segs.push_back({{"index", i}, {"t0", s.knots()[i]}, {"t1", s.knots()[i + 1]}, {"energy", e}});
      }
      summary["order"] = l.order();
      summary["segments"] = segs;
      summary["energy"] = total;
      out << "solved spline on " << s.intervals() << " intervals, energy " << format_double(total) << "\n";
    }
    std::filesystem::create_directories(dir);
    detail::write_file(dir / "trajectory.csv", csv);
    detail::write_file(dir / "summary.json", summary.dump(2) + "\n");
    out << "wrote " << (dir / "trajectory.csv").string() << " and " << (dir / "summary.json").string() << "\n";
    return kOk;
  } catch (...) {
    return report_exception(err, "solve");
  }
}

namespace detail {

inline int verify_lq(const ProblemFile& pf, const Options& opt, std::ostream& out) {
  SolveOptions so;
  so.check_hypotheses = !opt.skip_hypotheses;
  GeneralizedSpline s = solve_problem_p(pf.lq, so);
  if (pf.fault) {
    s = s.with_fault(pf.fault->segment, pf.fault->psi_scale);
    out << "fault injected: segment " << pf.fault->segment << ", psi scaled by " << format_double(pf.fault->psi_scale)
        << "\n";
  }
  const Profile lim = profile(pf.profile);
  const VerificationReport rep = verify(s, pf.lq, lim);
  out << "profile " << lim.name << "\n";
  out << "segment  interpolation  maximality  costate     euler-lagrange  cost-gap    optimality  status\n";
  out << "limit    " << sci(lim.interpolation) << "      " << sci(lim.maximality) << "   " << sci(lim.costate)
      << "   " << sci(lim.euler_lagrange) << "       " << sci(lim.cost) << "   0 decreases\n";
  bool ok = rep.passed();
  for (std::size_t i = 0; i < rep.segments.size(); ++i) {
    const auto& r = rep.segments[i];
    const auto pc = perturbation_check(s.segment(i), 20, opt.seed + i);
    const bool row_ok = rep.passed(i) && pc.ok();
    ok = ok && row_ok;
    char line[256];
    std::snprintf(line, sizeof line, "%-8zu %-14s %-11s %-11s %-15s %-11s %-11zu %s\n", i, sci(r.interpolation).c_str(),
                  sci(r.maximality).c_str(), sci(r.costate).c_str(), sci(r.euler_lagrange).c_str(),
                  sci(r.cost).c_str(), pc.violations, row_ok ? "ok" : "FAIL  <<<");
    out << line;
  }
  out << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? kOk : kCheckFailed;
}

inline int verify_spline(const ProblemFile& pf, std::ostream& out) {
  const SplineSpec& spec = *pf.spline;
  const PiecewiseSpline s = solve_spline(spec);
  const Profile lim = profile(pf.profile);
  const std::size_t p = s.order();
  const auto& tk = spec.knots;
  double interp = 0.0, boundary = 0.0, jump = 0.0, el = 0.0;
  for (std::size_t i = 0; i < tk.size(); ++i) {
    const std::size_t piece = i == 0 ? 0 : i - 1;
    interp = std::max(interp, (s.derivative(piece, tk[i], 0) - spec.values[i]).norm() / (1 + spec.values[i].norm()));
  }
  for (std::size_t k = 1; k < p; ++k) {
    boundary = std::max(boundary, (s.derivative(0, tk.front(), k) - spec.left_derivatives[k - 1]).norm());
    boundary = std::max(boundary, (s.derivative(s.intervals() - 1, tk.back(), k) - spec.right_derivatives[k - 1]).norm());
  }
  for (std::size_t i = 1; i + 1 < tk.size(); ++i) {
    for (std::size_t k = 0; k + 2 <= 2 * p; ++k) {
      const Vector l = s.derivative(i - 1, tk[i], k);
      jump = std::max(jump, (l - s.derivative(i, tk[i], k)).norm() / (1 + l.norm()));
    }
  }
  for (std::size_t i = 0; i < s.intervals(); ++i) {
    for (double t : grid(tk[i], tk[i + 1], 50)) {
      const auto d = s.derivatives(i, t, 2 * p);
      double scale = 1.0;
      for (std::size_t k = 0; k <= 2 * p; ++k) scale += (s.euler_lagrange().coefficient(k).eval(t) * d[k]).norm();
      el = std::max(el, s.residual(i, t).norm() / scale);
    }
  }
  struct Row {
    const char* name;
    double value, limit;
  };
  const Row rows[] = {{"interpolation", interp, lim.interpolation},
                      {"boundary", boundary, lim.interpolation},
                      {"continuity", jump, 10 * lim.interpolation},
                      {"euler-lagrange", el, lim.euler_lagrange}};
  out << "profile " << lim.name << "\ncheck           value       limit       status\n";
  bool ok = true;
  for (const auto& r : rows) {
    const bool row_ok = r.value <= r.limit;
    ok = ok && row_ok;
    char line[128];
    std::snprintf(line, sizeof line, "%-15s %-11s %-11s %s\n", r.name, sci(r.value).c_str(), sci(r.limit).c_str(),
                  row_ok ? "ok" : "FAIL  <<<");
    out << line;
  }
  out << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? kOk : kCheckFailed;
}

}  // namespace detail

inline int run_verify(const Options& opt, std::ostream& out, std::ostream& err) {
  try {
    const ProblemFile pf = load_with_overrides(opt);
    return pf.mode == "lq" ? detail::verify_lq(pf, opt, out) : detail::verify_spline(pf, out);
  } catch (...) {
    return report_exception(err, "verify");
  }
}

inline int run_controllability(const Options& opt, std::ostream& out, std::ostream& err) {
  try {
    const ProblemFile pf = load_with_overrides(opt);
    if (pf.mode != "lq") throw InputError(opt.path + ": controllability needs an lq-mode problem");
    const double t0 = opt.t0.value_or(pf.lq.knots.front());
    const double t1 = opt.t1.value_or(pf.lq.knots.back());
    if (!(t0 < t1)) throw InputError("--t0/--t1: window must satisfy t0 < t1");
    const auto r = controllability_gramian_w(pf.lq.a, pf.lq.b, t0, t1);
    out << "W on [" << format_double(t0) << ", " << format_double(t1) << "]\n";
    for (Eigen::Index i = 0; i < r.w.rows(); ++i) {
      for (Eigen::Index j = 0; j < r.w.cols(); ++j) out << (j ? " " : "") << format_double(r.w(i, j));
      out << "\n";
    }
    out << (r.controllable ? "controllable" : "not controllable") << "\n";
    return r.controllable ? kOk : kCheckFailed;
  } catch (...) {
    return report_exception(err, "controllability");
  }
}

}  // namespace gspline::cli
