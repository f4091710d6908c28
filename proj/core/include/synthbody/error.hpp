#pragma once

#include <stdexcept>
#include <string>

namespace synthbody {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs violate a documented precondition (bad dimensions, non-finite values, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened, parsed, or carries an unsupported format/version.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace synthbody
