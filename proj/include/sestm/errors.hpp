#pragma once

#include <stdexcept>
#include <string>

namespace sestm {

/// Malformed input file or stream. The message names the offending line.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structurally invalid input (bad lattice size, dimension mismatch, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A parameter lies outside its open parameter space.
class ParameterSpaceError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Factorization or other numerical failure.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative solver hit its iteration cap.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::string trace = {})
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::string& trace() const noexcept { return trace_; }

 private:
  std::string trace_;
};

}  // namespace sestm
