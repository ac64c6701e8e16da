#pragma once

#include <stdexcept>
#include <string>

namespace ttsa {

// Base for everything thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments to an operation (violated precondition).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration: schedule ranges, noise shapes, assumption gates.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A matrix required to be positive definite / invertible is not.
class SingularityError : public Error {
 public:
  explicit SingularityError(const std::string& msg, double min_eigenvalue = 0.0)
      : Error(msg), min_eigenvalue(min_eigenvalue) {}
  double min_eigenvalue;
};

// A matrix required to be Hurwitz (spectrum in the open left half-plane) is not.
class StabilityError : public Error {
 public:
  using Error::Error;
};

// Iteration budget exhausted before reaching the requested tolerance.
class NonConvergenceError : public Error {
 public:
  explicit NonConvergenceError(const std::string& msg, double residual)
      : Error(msg), residual(residual) {}
  double residual;
};

// Generic numerical failure (eigen-solver breakdown, overflow, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A quadrature / approximation cannot reach its stated accuracy.
class AccuracyError : public Error {
 public:
  using Error::Error;
};

// Trajectory state became non-finite.
class BlowupError : public Error {
 public:
  using Error::Error;
};

// Too many replicates hit the boundedness guard; the experiment is void.
class ExperimentInvalidError : public Error {
 public:
  using Error::Error;
};

}  // namespace ttsa
