#pragma once

#include <stdexcept>
#include <string>

namespace mam {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied parameters or data (bad sizes, degenerate inputs,
/// malformed files). The CLI maps these to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mam
