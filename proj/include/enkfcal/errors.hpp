#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace enkfcal {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs violate a documented precondition (shapes, ranges, malformed files).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class InsufficientEnsembleError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A file could not be parsed. Carries the 1-based row and column when known.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : ValidationError(what), row_(row), column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

// A factorization or solve failed even after the jitter retry.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// The forward model threw or returned a bad value for one ensemble member.
class ForwardModelError : public Error {
 public:
  ForwardModelError(const std::string& what, std::size_t member)
      : Error(what), member_(member) {}

  std::size_t member() const noexcept { return member_; }

 private:
  std::size_t member_;
};

}  // namespace enkfcal
