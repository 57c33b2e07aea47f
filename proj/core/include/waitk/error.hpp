#pragma once

#include <stdexcept>
#include <string>

namespace waitk {

// Base for every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad flags, invalid configuration, misuse of an API (exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent inputs: files, corpora, shapes (exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf or a failed numeric contract (exit code 3).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace waitk
