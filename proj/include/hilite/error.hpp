#pragma once

#include <stdexcept>
#include <string>

namespace hilite {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (files, shapes, lengths).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or divergence during numeric work.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid arguments or configuration supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace hilite
