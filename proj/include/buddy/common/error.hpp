#pragma once

#include <stdexcept>
#include <string>

namespace buddy {

// Base for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or missing configuration / data files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace buddy
