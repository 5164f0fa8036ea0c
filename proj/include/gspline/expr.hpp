#pragma once

// Scalar expressions in the time variable t: parse, evaluate, differentiate.
//
// Grammar:
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := ('-')? power
//   power  := atom ('^' integer)?
//   atom   := number | 't' | func '(' expr ')' | '(' expr ')'
//   func   := 'sin' | 'cos' | 'exp' | 'sqrt'

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>
#include <string_view>

#include "gspline/errors.hpp"

namespace gspline {

enum class ExprKind { Constant, Variable, Add, Sub, Mul, Div, Neg, Pow, Sin, Cos, Exp, Sqrt };

class TimeExpr {
 public:
  /// The constant 0.
  TimeExpr() : TimeExpr(constant(0.0)) {}

  static TimeExpr constant(double value) {
    auto node = std::make_shared<Node>();
    node->kind = ExprKind::Constant;
    node->value = value;
    return TimeExpr(std::move(node));
  }

  static TimeExpr variable() {
    static const TimeExpr t = [] {
      auto node = std::make_shared<Node>();
      node->kind = ExprKind::Variable;
      return TimeExpr(std::move(node));
    }();
    return t;
  }

  ExprKind kind() const noexcept { return node_->kind; }
  bool is_constant() const noexcept { return node_->kind == ExprKind::Constant; }
  bool is_constant(double v) const noexcept { return is_constant() && node_->value == v; }
  /// Literal value; meaningful only for constants.
  double value() const noexcept { return node_->value; }
  /// Integer exponent; meaningful only for Pow.
  int exponent() const noexcept { return node_->exponent; }
  /// Operand `i` (0 or 1). Unary nodes only have operand 0.
  TimeExpr operand(int i) const { return TimeExpr(i == 0 ? node_->lhs : node_->rhs); }

  double operator()(double t) const { return eval(t); }

  double eval(double t) const {
    const double v = eval_node(*node_, t);
    if (!std::isfinite(v)) throw DomainError("non-finite value in expression " + render());
    return v;
  }

  TimeExpr derivative() const;
  TimeExpr substitute(const TimeExpr& inner) const;
  std::string render() const;

  // Smart constructors; they fold constants and drop identity operands.
  static TimeExpr add(const TimeExpr& a, const TimeExpr& b);
  static TimeExpr sub(const TimeExpr& a, const TimeExpr& b);
  static TimeExpr mul(const TimeExpr& a, const TimeExpr& b);
  static TimeExpr div(const TimeExpr& a, const TimeExpr& b);
  static TimeExpr neg(const TimeExpr& a);
  static TimeExpr pow(const TimeExpr& a, int k);
  static TimeExpr unary(ExprKind kind, const TimeExpr& a);

 private:
  struct Node {
    ExprKind kind = ExprKind::Constant;
    double value = 0.0;
    int exponent = 0;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
  };

  explicit TimeExpr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  static TimeExpr make(ExprKind kind, const TimeExpr& a, const TimeExpr* b = nullptr,
                       int exponent = 0) {
    auto node = std::make_shared<Node>();
    node->kind = kind;
    node->lhs = a.node_;
    if (b != nullptr) node->rhs = b->node_;
    node->exponent = exponent;
    return TimeExpr(std::move(node));
  }

  static double int_pow(double base, int k) {
    unsigned n = static_cast<unsigned>(k < 0 ? -k : k);
    double result = 1.0;
    double b = base;
    while (n != 0) {
      if (n & 1u) result *= b;
      b *= b;
      n >>= 1;
    }
    if (k < 0) {
      if (result == 0.0) throw DomainError("division by zero (negative exponent)");
      result = 1.0 / result;
    }
    return result;
  }

  static double eval_node(const Node& n, double t) {
    switch (n.kind) {
      case ExprKind::Constant: return n.value;
      case ExprKind::Variable: return t;
      case ExprKind::Add: return eval_node(*n.lhs, t) + eval_node(*n.rhs, t);
      case ExprKind::Sub: return eval_node(*n.lhs, t) - eval_node(*n.rhs, t);
      case ExprKind::Mul: return eval_node(*n.lhs, t) * eval_node(*n.rhs, t);
      case ExprKind::Div: {
        const double den = eval_node(*n.rhs, t);
        if (den == 0.0) throw DomainError("division by zero");
        return eval_node(*n.lhs, t) / den;
      }
      case ExprKind::Neg: return -eval_node(*n.lhs, t);
      case ExprKind::Pow: return int_pow(eval_node(*n.lhs, t), n.exponent);
      case ExprKind::Sin: return std::sin(eval_node(*n.lhs, t));
      case ExprKind::Cos: return std::cos(eval_node(*n.lhs, t));
      case ExprKind::Exp: return std::exp(eval_node(*n.lhs, t));
      case ExprKind::Sqrt: {
        const double arg = eval_node(*n.lhs, t);
        if (arg < 0.0) throw DomainError("sqrt of negative value");
        return std::sqrt(arg);
      }
    }
    return 0.0;
  }

  std::shared_ptr<const Node> node_;
};

inline TimeExpr TimeExpr::add(const TimeExpr& a, const TimeExpr& b) {
  if (a.is_constant() && b.is_constant()) return constant(a.value() + b.value());
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  return make(ExprKind::Add, a, &b);
}

inline TimeExpr TimeExpr::sub(const TimeExpr& a, const TimeExpr& b) {
  if (a.is_constant() && b.is_constant()) return constant(a.value() - b.value());
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return neg(b);
  return make(ExprKind::Sub, a, &b);
}

inline TimeExpr TimeExpr::mul(const TimeExpr& a, const TimeExpr& b) {
  if (a.is_constant() && b.is_constant()) return constant(a.value() * b.value());
  if (a.is_constant(0.0) || b.is_constant(0.0)) return constant(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(-1.0)) return neg(b);
  if (b.is_constant(-1.0)) return neg(a);
  return make(ExprKind::Mul, a, &b);
}

inline TimeExpr TimeExpr::div(const TimeExpr& a, const TimeExpr& b) {
  if (a.is_constant() && b.is_constant() && b.value() != 0.0) return constant(a.value() / b.value());
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(0.0) && !b.is_constant()) return constant(0.0);
  return make(ExprKind::Div, a, &b);
}

inline TimeExpr TimeExpr::neg(const TimeExpr& a) {
  if (a.is_constant()) return constant(-a.value());
  if (a.kind() == ExprKind::Neg) return a.operand(0);
  return make(ExprKind::Neg, a);
}

inline TimeExpr TimeExpr::pow(const TimeExpr& a, int k) {
  if (k == 0) return constant(1.0);
  if (k == 1) return a;
  if (a.is_constant() && (k > 0 || a.value() != 0.0) && std::isfinite(int_pow(a.value(), k))) {
    return constant(int_pow(a.value(), k));
  }
  return make(ExprKind::Pow, a, nullptr, k);
}

inline TimeExpr TimeExpr::unary(ExprKind kind, const TimeExpr& a) {
  if (a.is_constant()) {
    const double v = a.value();
    switch (kind) {
      case ExprKind::Sin: return constant(std::sin(v));
      case ExprKind::Cos: return constant(std::cos(v));
      case ExprKind::Exp:
        if (std::isfinite(std::exp(v))) return constant(std::exp(v));
        break;
      case ExprKind::Sqrt:
        if (v >= 0.0) return constant(std::sqrt(v));
        break;
      default: break;
    }
  }
  return make(kind, a);
}

inline TimeExpr operator+(const TimeExpr& a, const TimeExpr& b) { return TimeExpr::add(a, b); }
inline TimeExpr operator-(const TimeExpr& a, const TimeExpr& b) { return TimeExpr::sub(a, b); }
inline TimeExpr operator*(const TimeExpr& a, const TimeExpr& b) { return TimeExpr::mul(a, b); }
inline TimeExpr operator/(const TimeExpr& a, const TimeExpr& b) { return TimeExpr::div(a, b); }
inline TimeExpr operator-(const TimeExpr& a) { return TimeExpr::neg(a); }
inline TimeExpr operator*(double c, const TimeExpr& a) { return TimeExpr::constant(c) * a; }
inline TimeExpr pow(const TimeExpr& a, int k) { return TimeExpr::pow(a, k); }
inline TimeExpr sin(const TimeExpr& a) { return TimeExpr::unary(ExprKind::Sin, a); }
inline TimeExpr cos(const TimeExpr& a) { return TimeExpr::unary(ExprKind::Cos, a); }
inline TimeExpr exp(const TimeExpr& a) { return TimeExpr::unary(ExprKind::Exp, a); }
inline TimeExpr sqrt(const TimeExpr& a) { return TimeExpr::unary(ExprKind::Sqrt, a); }

inline TimeExpr TimeExpr::derivative() const {
  switch (kind()) {
    case ExprKind::Constant: return constant(0.0);
    case ExprKind::Variable: return constant(1.0);
    default: break;
  }
  const TimeExpr a = operand(0);
  const TimeExpr b = kind() <= ExprKind::Div ? operand(1) : a;
  switch (kind()) {
    case ExprKind::Constant: return constant(0.0);
    case ExprKind::Variable: return constant(1.0);
    case ExprKind::Add: return a.derivative() + b.derivative();
    case ExprKind::Sub: return a.derivative() - b.derivative();
    case ExprKind::Mul: return a.derivative() * b + a * b.derivative();
    case ExprKind::Div: return (a.derivative() * b - a * b.derivative()) / pow(b, 2);
    case ExprKind::Neg: return -a.derivative();
    case ExprKind::Pow:
      return constant(exponent()) * pow(a, exponent() - 1) * a.derivative();
    case ExprKind::Sin: return cos(a) * a.derivative();
    case ExprKind::Cos: return -(sin(a) * a.derivative());
    case ExprKind::Exp: return *this * a.derivative();
    case ExprKind::Sqrt: return a.derivative() / (constant(2.0) * *this);
  }
  return constant(0.0);
}

/// Replaces every occurrence of t by `inner`.
inline TimeExpr TimeExpr::substitute(const TimeExpr& inner) const {
  switch (kind()) {
    case ExprKind::Constant: return *this;
    case ExprKind::Variable: return inner;
    case ExprKind::Add: return operand(0).substitute(inner) + operand(1).substitute(inner);
    case ExprKind::Sub: return operand(0).substitute(inner) - operand(1).substitute(inner);
    case ExprKind::Mul: return operand(0).substitute(inner) * operand(1).substitute(inner);
    case ExprKind::Div: return operand(0).substitute(inner) / operand(1).substitute(inner);
    case ExprKind::Neg: return -operand(0).substitute(inner);
    case ExprKind::Pow: return pow(operand(0).substitute(inner), exponent());
    default: return unary(kind(), operand(0).substitute(inner));
  }
}

/// Canonical fully-parenthesized text; parses back to an equivalent expression.
inline std::string TimeExpr::render() const {
  switch (kind()) {
    case ExprKind::Constant: {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", value());
      return value() < 0.0 ? "(" + std::string(buf) + ")" : std::string(buf);
    }
    case ExprKind::Variable: return "t";
    case ExprKind::Add: return "(" + operand(0).render() + " + " + operand(1).render() + ")";
    case ExprKind::Sub: return "(" + operand(0).render() + " - " + operand(1).render() + ")";
    case ExprKind::Mul: return "(" + operand(0).render() + " * " + operand(1).render() + ")";
    case ExprKind::Div: return "(" + operand(0).render() + " / " + operand(1).render() + ")";
    case ExprKind::Neg: return "(-" + operand(0).render() + ")";
    case ExprKind::Pow: return "(" + operand(0).render() + ")^" + std::to_string(exponent());
    case ExprKind::Sin: return "sin(" + operand(0).render() + ")";
    case ExprKind::Cos: return "cos(" + operand(0).render() + ")";
    case ExprKind::Exp: return "exp(" + operand(0).render() + ")";
    case ExprKind::Sqrt: return "sqrt(" + operand(0).render() + ")";
  }
  return {};
}

namespace detail {

class ExprParser {
 public:
  explicit ExprParser(std::string_view src) : src_(src) {}

  TimeExpr parse() {
    TimeExpr e = expr();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected character '" + std::string(1, src_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError("syntax error: " + msg, pos_); }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  TimeExpr expr() {
    TimeExpr lhs = term();
    for (;;) {
      if (accept('+')) lhs = lhs + term();
      else if (accept('-')) lhs = lhs - term();
      else return lhs;
    }
  }

  TimeExpr term() {
    TimeExpr lhs = factor();
    for (;;) {
      if (accept('*')) lhs = lhs * factor();
      else if (accept('/')) lhs = lhs / factor();
      else return lhs;
    }
  }

  TimeExpr factor() {
    if (accept('-')) return -power();
    return power();
  }

  TimeExpr power() {
    TimeExpr base = atom();
    if (!accept('^')) return base;
    skip_ws();
    const std::size_t start = pos_;
    bool negative = false;
    if (pos_ < src_.size() && src_[pos_] == '-') {
      negative = true;
      ++pos_;
    }
    const std::size_t digits = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    if (pos_ == digits) {
      pos_ = start;
      fail("integer exponent expected");
    }
    if (pos_ < src_.size() && (src_[pos_] == '.' || src_[pos_] == 'e' || src_[pos_] == 'E')) {
      fail("exponent must be an integer");
    }
    const long k = std::strtol(std::string(src_.substr(digits, pos_ - digits)).c_str(), nullptr, 10);
    if (k > 1000) {
      pos_ = digits;
      fail("exponent too large");
    }
    return pow(base, negative ? -static_cast<int>(k) : static_cast<int>(k));
  }

  TimeExpr atom() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c))) return number();
    if (c == '(') {
      ++pos_;
      TimeExpr e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < src_.size() && std::isalnum(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      const std::string_view name = src_.substr(start, pos_ - start);
      if (name == "t") return TimeExpr::variable();
      ExprKind kind;
      if (name == "sin") kind = ExprKind::Sin;
      else if (name == "cos") kind = ExprKind::Cos;
      else if (name == "exp") kind = ExprKind::Exp;
      else if (name == "sqrt") kind = ExprKind::Sqrt;
      else {
        pos_ = start;
        fail("unknown identifier '" + std::string(name) + "'");
      }
      if (!accept('(')) fail("expected '(' after " + std::string(name));
      TimeExpr arg = expr();
      if (!accept(')')) fail("expected ')'");
      return TimeExpr::unary(kind, arg);
    }
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  TimeExpr number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      const std::size_t from = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      return pos_ - from;
    };
    digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) fail("malformed exponent in number");
    }
    const double v = std::strtod(std::string(src_.substr(start, pos_ - start)).c_str(), nullptr);
    if (!std::isfinite(v)) {
      pos_ = start;
      fail("number out of range");
    }
    return TimeExpr::constant(v);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline TimeExpr parse(std::string_view source) { return detail::ExprParser(source).parse(); }
inline double eval(const TimeExpr& e, double t) { return e.eval(t); }
inline TimeExpr differentiate(const TimeExpr& e) { return e.derivative(); }
inline std::string render(const TimeExpr& e) { return e.render(); }

}  // namespace gspline
