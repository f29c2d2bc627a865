#pragma once

#include <stdexcept>
#include <string>

namespace splatrack {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidInputError : Error {
  using Error::Error;
};

struct InsufficientPointsError : Error {
  using Error::Error;
};

struct AllPrunedError : Error {
  using Error::Error;
};

struct InvalidPoseError : Error {
  using Error::Error;
};

struct InvalidTransformError : Error {
  using Error::Error;
};

struct BehindCameraError : Error {
  using Error::Error;
};

struct NumericalFailureError : Error {
  using Error::Error;
};

struct SingularMatrixError : Error {
  using Error::Error;
};

struct OutOfViewError : Error {
  using Error::Error;
};

struct OptimizationFailureError : Error {
  using Error::Error;
};

struct EmptySilhouetteError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace splatrack
