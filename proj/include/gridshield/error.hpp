#pragma once

#include <stdexcept>
#include <string>

namespace gridshield {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scenario or topology configuration could not be interpreted.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace gridshield
