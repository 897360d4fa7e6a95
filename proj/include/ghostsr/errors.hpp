#pragma once

#include <stdexcept>
#include <string>

namespace ghostsr {

// Argument errors use std::invalid_argument directly. The types below cover
// the remaining failure classes the CLI maps onto distinct exit codes.

/// An operation was requested on an object in the wrong lifecycle state,
/// e.g. inference through a ghost layer whose shifts were never hardened.
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A model config, checkpoint or plan failed structural validation.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A named file or tensor does not exist.
class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ghostsr
