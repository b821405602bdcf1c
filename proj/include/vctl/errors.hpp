#pragma once

#include <stdexcept>
#include <string>

namespace vctl {

// Argument outside an operation's domain (t <= 0 for a singular kernel, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Caller violated a documented precondition (sizes, ordering, counts).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical procedure failed to produce a trustworthy result.
// `diagnostic` carries a short machine-readable summary for reports.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, std::string diagnostic = {})
      : std::runtime_error(what), diagnostic_(std::move(diagnostic)) {}
  const std::string& diagnostic() const noexcept { return diagnostic_; }

 private:
  std::string diagnostic_;
};

// 1 - c * Laplace(K) vanishes: the resolvent grows without bound.
class BlowUpError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Probe or query point left the y-grid of a value function.
class DomainCoverageError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace vctl
