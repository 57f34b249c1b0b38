#pragma once

#include <stdexcept>
#include <string>

namespace actscore {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer shape disagreement.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent on-disk data.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Caller passed a value outside the documented range.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

}  // namespace actscore
