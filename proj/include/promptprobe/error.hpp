#pragma once

#include <stdexcept>
#include <string>

namespace promptprobe {

// Base class for every error raised by the library. Callers that only care
// about "something went wrong" catch this; tests and the CLI discriminate on
// the concrete subclasses below.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file header, bad magic, unsupported version.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Payload present but semantically invalid (NaN, duplicate ids, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Payload shorter than its header promises.
class LengthError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Dimension or shape disagreement between arguments.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Precondition on a scalar argument or configuration value violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Numerical failure during optimization (non-finite loss, dead head, ...).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace promptprobe
