#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kwsa {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got, const std::string& where)
      : Error(where + ": dimension mismatch (expected " + std::to_string(expected) +
              ", got " + std::to_string(got) + ")") {}
};

/// A value violates a documented type invariant (non-symmetric Laplacian, bad spec, ...).
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

class GenerationFailure : public Error {
 public:
  using Error::Error;
};

class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

class InvalidSpacing : public Error {
 public:
  explicit InvalidSpacing(double c)
      : Error("finite-difference spacing must be positive, got " + std::to_string(c)) {}
};

/// A non-finite iterate was produced. Carries the iteration and node.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t iteration, std::size_t node, std::size_t run = 0)
      : Error("divergence: non-finite iterate at run " + std::to_string(run) +
              ", iteration " + std::to_string(iteration) + ", node " + std::to_string(node)),
        iteration_(iteration),
        node_(node),
        run_(run) {}

  std::size_t iteration() const noexcept { return iteration_; }
  std::size_t node() const noexcept { return node_; }
  std::size_t run() const noexcept { return run_; }

  DivergenceError with_run(std::size_t run) const { return {iteration_, node_, run}; }

 private:
  std::size_t iteration_;
  std::size_t node_;
  std::size_t run_;
};

class RateUndefined : public Error {
 public:
  using Error::Error;
};

/// Malformed text input (edge lists, datasets, traces, config files).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Unknown key, ill-typed value or inadmissible parameter in a CLI config.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace kwsa
