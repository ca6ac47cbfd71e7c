#pragma once

#include <stdexcept>
#include <string>

namespace bicause {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File system failures (missing file, unwritable output).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed input: missing columns, unparseable cells, bad tree files.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Data that parses but violates a modelling contract (non-binary treatment,
/// a single treatment arm, NaN values).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Precondition violated by the caller.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace bicause
