#pragma once

#include <stdexcept>
#include <string>

namespace dart {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Shapes or lengths do not conform to an operation's shape rule.
struct DimensionError : Error {
  using Error::Error;
};

// An input value violates a documented precondition or type invariant.
struct ValidationError : Error {
  using Error::Error;
};

// API misuse that a correct caller can never trigger with valid data.
struct ContractViolation : Error {
  using Error::Error;
};

struct UnsupportedOperationError : Error {
  using Error::Error;
};

struct LookupError : Error {
  using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
  using Error::Error;
};

// Malformed input files (parse or schema problems).
struct DataError : Error {
  using Error::Error;
};

struct InsufficientDataError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// Training produced a non-finite loss term.
struct DivergenceError : Error {
  DivergenceError(const std::string& what, long step, const std::string& term)
      : Error(what), step(step), term(term) {}
  long step;
  std::string term;
};

}  // namespace dart
