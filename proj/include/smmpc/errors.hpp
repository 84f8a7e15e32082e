#pragma once

#include <stdexcept>
#include <string>

namespace smmpc {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Rejected input: shapes or sizes do not match the operation's contract.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (files, keys, parameter ranges). CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure (rank loss, singular factor, divergence). CLI exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Input signal is not persistently exciting at the required order.
class ExcitationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// The requested effective order exceeds what the data supports.
class DegenerateOrderError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Optimization problem has no feasible point. CLI exit code 4.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Operation not defined for this object (e.g. covariance of an SPC predictor).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// File read/write failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace smmpc
