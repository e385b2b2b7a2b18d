#pragma once

#include <stdexcept>
#include <string>

namespace mapfilter {

// Any failure caused by bad input data (as opposed to bad usage).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

class BadMagicError : public DataError {
 public:
  using DataError::DataError;
};

class VersionMismatchError : public DataError {
 public:
  using DataError::DataError;
};

class TruncatedError : public DataError {
 public:
  using DataError::DataError;
};

class InvalidArgument : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace mapfilter
