#pragma once

#include <stdexcept>
#include <string>

namespace bmapq {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs with the wrong shape: mismatched matrix dimensions, indices out of
// range, a transition matrix built without the blocks a caller needs.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// A numerical procedure failed or produced a result that breaks one of its
// own invariants (row sums, probability bounds, convergence).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// The Markov chain handed to a stationary solver does not have a unique
// stationary distribution.
class IrreducibilityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Arrival truncation bound would exceed its hard cap.
class TruncationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Power iteration hit its iteration cap.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : NumericalError(what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

// Bad experiment configuration. `field` is the dotted path of the offending
// entry, e.g. "queue.X".
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what),
        field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace bmapq
