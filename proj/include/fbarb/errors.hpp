#pragma once

#include <stdexcept>
#include <string>

namespace fbarb {

/// Input outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An adaptive numerical procedure stopped before reaching its tolerance.
/// Carries the best estimate and the error it achieved.
class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, double best_estimate, double achieved_error)
      : std::runtime_error(what), best_estimate_(best_estimate), achieved_error_(achieved_error) {}

  double best_estimate() const noexcept { return best_estimate_; }
  double achieved_error() const noexcept { return achieved_error_; }

 private:
  double best_estimate_;
  double achieved_error_;
};

/// A configured size limit (enumeration depth, truncation index) would be exceeded.
class CapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs are individually valid but inconsistent with each other
/// (e.g. a coefficient table for the wrong level).
class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace fbarb
