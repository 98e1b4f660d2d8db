#pragma once

#include <stdexcept>
#include <string>

namespace aurecon {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents disagree with what an operation requires.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf showed up in a forward or backward pass.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable file (manifest, checkpoint, image, config).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace aurecon
