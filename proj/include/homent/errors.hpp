#pragma once

#include <stdexcept>
#include <string>

namespace homent {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a candidate mixing matrix cannot be inverted reliably.
class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An innovation series with zero sample variance.
class DegenerateInnovationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// G is rank deficient, so the asymptotic covariance does not exist.
class UnidentifiedModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace homent
