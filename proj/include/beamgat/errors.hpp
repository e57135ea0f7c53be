#pragma once

#include <stdexcept>

namespace beamgat {

// Bad input data: unreadable files, malformed records, frames that cannot be
// processed. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

// Invalid configuration or arguments. Maps to CLI exit code 1.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace beamgat
