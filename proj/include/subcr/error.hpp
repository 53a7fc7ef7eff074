#pragma once

#include <stdexcept>
#include <string>

namespace subcr {

/// Base of every error raised by the library. `exit_code()` follows the CLI
/// convention: 1 for runtime/numerical failures, 2 for usage and IO problems.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return 1; }
};

class UsageError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

/// Structurally invalid input file (bad node id, wrong column count, ...).
class MalformedInput : public IoError {
 public:
  using IoError::IoError;
};

class ParseError : public IoError {
 public:
  using IoError::IoError;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public UsageError {
 public:
  using UsageError::UsageError;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double residual)
      : NumericalError(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Metric is undefined for the given labels (e.g. AUC with a single class).
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

}  // namespace subcr
