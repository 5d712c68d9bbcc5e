#pragma once

#include <stdexcept>
#include <string>

namespace dualsddp {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file (not valid JSON at all).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Structurally valid JSON that does not match the instance schema.
/// Messages carry a JSON pointer path to the offending element.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Instance that parses but violates a model invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure inside the LP solver: tolerances cannot be met.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Requested enumeration exceeds a configured budget.
class BudgetError : public Error {
 public:
  using Error::Error;
};

}  // namespace dualsddp
