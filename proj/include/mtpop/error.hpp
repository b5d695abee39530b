#pragma once

#include <stdexcept>
#include <string>

namespace mtpop {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An index or block fell outside of the tensor it refers to.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// A configuration or argument violated a documented precondition.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: non-finite inputs, divergence, singular systems.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable input data.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace mtpop
