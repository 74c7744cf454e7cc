#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ztseg {

/// Base of every error raised by the library. The CLI maps NumericalError to
/// exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input line. `line()` is 1-based.
class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Per-identity timestamp went backwards.
class OrderingError : public ValidationError {
 public:
  OrderingError(std::string event_id, const std::string& what)
      : ValidationError(what), event_id_(std::move(event_id)) {}
  const std::string& event_id() const noexcept { return event_id_; }

 private:
  std::string event_id_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class ReferenceError : public Error {
 public:
  using Error::Error;
};

class CoverageError : public Error {
 public:
  using Error::Error;
};

/// Cholesky factorization failed even after regularization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace ztseg
