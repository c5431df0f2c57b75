#pragma once

#include <stdexcept>
#include <string>

namespace ldslab {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible or invalid matrix dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An operation required a full-rank matrix and got a numerically
/// rank-deficient one.
class RankError : public Error {
 public:
  using Error::Error;
};

/// The spectral radius condition for a solver was violated.
class InstabilityError : public Error {
 public:
  using Error::Error;
};

/// A computed value left the range of finite doubles.
class OverflowError : public Error {
 public:
  using Error::Error;
};

/// An iteration failed to reach its tolerance within the step budget.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Theoretical band formula is undefined for the given parameters.
class BandUndefinedError : public Error {
 public:
  using Error::Error;
};

/// Summary statistics were requested for an empty value list.
class EmptySummaryError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration input; carries the offending field name.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : Error(field + ": " + message), field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace ldslab
