#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gspline {

/// Malformed expression text. `offset()` is the byte offset of the offending token.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Evaluation outside the domain of an expression (x/0, sqrt(-1), overflow).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Step-size underflow or step budget exhausted.
class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by `apply` when fewer derivatives are supplied than the operator order needs.
class MissingDerivativeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical failure that theory rules out (e.g. a Gramian that is not positive definite).
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One of (H1) B nonsingular, (H2) controllable, (H3) smooth coefficients failed.
class HypothesisError : public std::runtime_error {
 public:
  HypothesisError(std::string hypothesis, const std::string& detail)
      : std::runtime_error(hypothesis + ": " + detail), hypothesis_(std::move(hypothesis)) {}
  const std::string& hypothesis() const noexcept { return hypothesis_; }

 private:
  std::string hypothesis_;
};

/// Wraps a failure inside one segment of a multi-segment solve.
class SegmentError : public std::runtime_error {
 public:
  SegmentError(std::size_t segment, const std::string& detail)
      : std::runtime_error("segment " + std::to_string(segment) + ": " + detail),
        segment_(segment) {}
  std::size_t segment() const noexcept { return segment_; }

 private:
  std::size_t segment_;
};

}  // namespace gspline
