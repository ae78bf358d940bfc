#pragma once

#include <stdexcept>
#include <string>

namespace thermo {

// Base for every failure raised by the library. The CLI maps subclasses onto
// exit codes: ConfigError -> 3, everything else -> 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Iteration caps, missing sign changes, failed fits, lost summability.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Inputs outside an operation's domain (inadmissible words, points outside Z_i, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A point sits on a shared boundary of two branch images or partition cells.
class BoundaryError : public DomainError {
 public:
  using DomainError::DomainError;
};

// A configured cap (cylinder count, digit depth, state count) would be exceeded.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

}  // namespace thermo
