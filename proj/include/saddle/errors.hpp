#pragma once

#include <stdexcept>
#include <string>

namespace saddle {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ambient shapes do not match the manifold.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A point violates its manifold invariants.
class InvalidPointError : public Error {
 public:
  using Error::Error;
};

/// Tangent vectors based at different points were combined.
class BaseMismatchError : public Error {
 public:
  using Error::Error;
};

/// The retraction has no well-defined image (e.g. p + xi = 0 on the sphere).
class DegenerateRetractionError : public Error {
 public:
  using Error::Error;
};

/// An operation was called outside its contract.
class MisuseError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values appeared in a computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// The objective lacks an optional capability (e.g. Hessian action).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// A request exceeds the dense-algebra limits of the library.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// A scalar parameter is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// The objective is singular at the requested point.
class SingularPointError : public Error {
 public:
  using Error::Error;
};

/// Step sizes too small to resolve in double precision.
class IllConditionedError : public Error {
 public:
  using Error::Error;
};

}  // namespace saddle
