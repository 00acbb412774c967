#pragma once

#include <stdexcept>
#include <string>

namespace panelmix {

/// Caller broke a precondition (dimension mismatch, index out of range).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain (non-positive variance, invalid
/// mixing proportions, tau outside (0,1)).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed input file or configuration.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An estimation step failed to produce a usable fit.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure (non-PSD information beyond tolerance, NaN state).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}
}  // namespace detail

}  // namespace panelmix
