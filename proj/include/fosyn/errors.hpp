#pragma once

#include <stdexcept>
#include <string>

namespace fosyn {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Matrix block shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Non-finite entries, malformed arguments, violated preconditions.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// A linear matrix equation has no (unique) solution, e.g. a Lyapunov
// equation with a non-Hurwitz coefficient matrix.
class NoSolutionError : public Error {
 public:
  using Error::Error;
};

// The feedthrough constraint D11 + D12*DK*D21 = 0 is unsatisfiable, so no
// controller of the requested order achieves a finite H2 norm.
class NoFiniteH2Error : public Error {
 public:
  using Error::Error;
};

// The loop interconnection is ill-posed: I + DK_hat*D22 (or its inverse
// counterpart) is singular or numerically close to singular.
class WellPosednessError : public Error {
 public:
  using Error::Error;
};

// A problem or controller document could not be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

// A norm evaluation was requested too close to the stability boundary for
// the Lyapunov machinery to produce a trustworthy answer.
class StabilityBoundaryError : public Error {
 public:
  StabilityBoundaryError(const std::string& what, double abscissa)
      : Error(what), abscissa_(abscissa) {}
  double abscissa() const { return abscissa_; }

 private:
  double abscissa_;
};

// Every multi-start initial point evaluated to +inf.
class NoFiniteStartError : public Error {
 public:
  using Error::Error;
};

}  // namespace fosyn
