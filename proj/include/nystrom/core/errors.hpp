#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nystrom {

// Every failure raised by the library derives from Error, so callers can
// catch the whole family at once.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A point or parameter lies outside the set on which an operation is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value passed to a constructor or routine.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Kernel evaluation at coincident points or another non-finite result.
class SingularityError : public Error {
 public:
  using Error::Error;
};

// Newton failure, non-convergent expansion, or similar numerical breakdown.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A reference computation (adaptive quadrature, series) failed to converge.
class OracleError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ResourceError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::vector<double> history)
      : Error(what), residual_history(std::move(history)) {}
  std::vector<double> residual_history;
};

}  // namespace nystrom
