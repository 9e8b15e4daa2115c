#ifndef CALERM_ERROR_HPP
#define CALERM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace calerm {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite input to a numeric routine.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed call: dimension mismatch, out-of-range parameter, infeasible start.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Huber calibration asked for a scale of exactly zero.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// Supremum over an unbounded set.
class UnboundedError : public Error {
 public:
  using Error::Error;
};

/// Non-finite objective or similar breakdown inside an iterative routine.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Degenerate data (e.g. all-zero draws where a norm is required).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration document. `key()` names the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace calerm

#endif  // CALERM_ERROR_HPP
