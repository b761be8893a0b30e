#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace safegain {

// Base class for all library errors. Callers that only want "something in
// safegain failed" can catch this one type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A scalar or structural argument is outside its documented domain.
struct InvalidParameter : Error {
  using Error::Error;
};

// Vector/matrix dimensions do not agree.
struct ShapeError : Error {
  using Error::Error;
};

// A numeric evaluation produced NaN/Inf where a finite value is required.
// Carries the state at which the evaluation failed.
struct NumericError : Error {
  std::vector<double> state;
  NumericError(const std::string& msg, std::vector<double> at)
      : Error(msg), state(std::move(at)) {}
};

// The Legendre-Fenchel transform was requested for a function whose
// derivative is not strictly increasing and unbounded.
struct IllPosedTransform : Error {
  using Error::Error;
};

// Boundary sampling could not place the requested points.
struct BoundaryNotFound : Error {
  using Error::Error;
};

// The pointwise safety constraint cannot be met at this state
// (zero control authority together with a violated bare constraint).
struct InfeasibleFilter : Error {
  using Error::Error;
};

// A user-supplied penalty matrix is not symmetric positive definite.
struct InvalidR : Error {
  using Error::Error;
};

// The gain-margin augmentation divides by a vanishing control Lie
// derivative while the augmenting numerator is nonzero.
struct DegenerateAugmentation : Error {
  using Error::Error;
};

// A configuration file is syntactically or semantically invalid.
struct ConfigError : Error {
  using Error::Error;
};

// A sampling region does not intersect the set it is required to cover.
struct InvalidRegion : Error {
  using Error::Error;
};

}  // namespace safegain
