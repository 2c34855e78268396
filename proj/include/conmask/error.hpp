#pragma once

#include <stdexcept>
#include <string>

namespace conmask {

// Base for every error raised by the library. The subclasses map onto the
// CLI exit codes: usage 1, data 2, numerical 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace conmask
