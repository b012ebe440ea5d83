#pragma once

#include <stdexcept>
#include <string>

namespace cecnet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor or feature-map shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A numeric argument outside its admissible range (temperature, coefficients...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Missing or inconsistent learnable members for a requested mode.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Labels, classes or datasets that cannot satisfy a request.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Misuse of the autodiff API, e.g. backward on a non-scalar.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss during optimization.
class TrainingError : public Error {
 public:
  using Error::Error;
};

class OracleError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cecnet
