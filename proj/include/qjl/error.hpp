#pragma once

#include <stdexcept>
#include <string>

namespace qjl {

/// Bad dimensions, out-of-range parameters, malformed user input.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operation not valid for the current object state (e.g. scoring an empty cache).
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A file could not be opened, read, or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file was readable but its contents violate the on-disk format.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qjl
