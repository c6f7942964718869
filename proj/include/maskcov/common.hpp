#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace maskcov {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Error hierarchy. Every failure the library reports derives from Error so
// callers can catch one type; the CLI maps NumericalFailure to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class InsufficientRows : public Error {
 public:
  using Error::Error;
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class DegenerateEstimate : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

class CapExceeded : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidParameter(message);
}

inline void require_shape(bool condition, const std::string& message) {
  if (!condition) throw DimensionError(message);
}

}  // namespace maskcov
