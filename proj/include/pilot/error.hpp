#pragma once

#include <stdexcept>
#include <string>

namespace pilot {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (CSV, feature tables, responses).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameter or option value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incompatible model file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace pilot
