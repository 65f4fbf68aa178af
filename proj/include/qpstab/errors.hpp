#ifndef QPSTAB_ERRORS_HPP
#define QPSTAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace qpstab {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad inputs: inconsistent dimensions, broken invariants, malformed files.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// A computation failed or a numerical hypothesis does not hold.
class NumericalError : public Error {
public:
  using Error::Error;
};

class DimensionMismatch : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class RankDeficientB : public ValidationError {
public:
  RankDeficientB(const std::string& what, double sigma_min, double sigma_max)
      : ValidationError(what), sigma_min(sigma_min), sigma_max(sigma_max) {}
  double sigma_min;
  double sigma_max;
};

class NonFiniteEntry : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class IoError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class NotAnEquilibrium : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class NoConvergence : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class SingularJacobian : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class EigenFailure : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class ExtensionFailed : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class NonFiniteState : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class VerificationMismatch : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class HypothesisNotMet : public NumericalError {
public:
  using NumericalError::NumericalError;
};

}  // namespace qpstab

#endif
