#pragma once

#include <stdexcept>
#include <string>

namespace pcsense {

/// Raised when arguments violate a documented precondition (bad dimensions,
/// nonpositive variances, parameters outside their admissible domain).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parameters outside the admissible region of a closed-form result.
class DomainError : public InputError {
 public:
  using InputError::InputError;
};

/// An iterative routine failed to converge, or a quantity that must be
/// strictly positive came out otherwise.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, long iterations = -1)
      : std::runtime_error(what), iterations_(iterations) {}

  /// Iterations spent before giving up, or -1 when not applicable.
  long iterations() const noexcept { return iterations_; }

 private:
  long iterations_;
};

}  // namespace pcsense
