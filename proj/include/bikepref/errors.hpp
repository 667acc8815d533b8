#pragma once

#include <stdexcept>
#include <string>

namespace bikepref {

/// Malformed or inconsistent input data (files, ids, coordinates).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments or configuration supplied by the caller.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace bikepref
