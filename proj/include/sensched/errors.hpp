#pragma once

#include <stdexcept>
#include <string>

namespace sensched {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments: dimension mismatch, out-of-range index, violated precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A process model that violates the noise or rank requirements.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Riccati iteration did not settle.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values inside the learner.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Rejection sampling for scenarios gave up.
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// File-format failures. Subclasses distinguish the cause.
class FormatError : public Error {
 public:
  using Error::Error;
};

class VersionMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

class ChecksumMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

class MalformedFile : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace sensched
