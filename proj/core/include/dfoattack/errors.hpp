#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dfoattack {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition was violated (infeasible point, length mismatch).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Target/original class pair or class count is unusable.
class InvalidObjective : public Error {
 public:
  using Error::Error;
};

/// Sub-sampling plan or hierarchy level cannot be built.
class InvalidPlan : public Error {
 public:
  using Error::Error;
};

/// Input shape does not match what a model expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Oracle evaluation failed: non-finite logits, remote timeout, malformed reply.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Model or data file could not be parsed. Carries the offending line.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace dfoattack
