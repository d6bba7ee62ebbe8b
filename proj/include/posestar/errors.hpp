#pragma once

#include <stdexcept>
#include <string>

namespace posestar {

// Root of every error thrown by the library. The CLI maps subclasses of
// InputError to exit code 2 and everything else to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

// tensorio
class FormatError : public InputError {
 public:
  using InputError::InputError;
};
class CorruptError : public InputError {
 public:
  using InputError::InputError;
};
class ValueError : public InputError {
 public:
  using InputError::InputError;
};
class IoError : public InputError {
 public:
  using InputError::InputError;
};

// instruction
class UnknownGarmentError : public InputError {
 public:
  using InputError::InputError;
};
class UnknownAnchorError : public InputError {
 public:
  using InputError::InputError;
};
class InvalidRangeError : public InputError {
 public:
  using InputError::InputError;
};

// numerical stages
class ParamError : public Error {
 public:
  using Error::Error;
};
class ShapeError : public Error {
 public:
  using Error::Error;
};
class DegenerateMapError : public Error {
 public:
  using Error::Error;
};
class EmptyRegionError : public Error {
 public:
  using Error::Error;
};
class NoTokensError : public Error {
 public:
  using Error::Error;
};

}  // namespace posestar
