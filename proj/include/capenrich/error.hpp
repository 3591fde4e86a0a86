#pragma once

#include <stdexcept>
#include <string>

namespace capenrich {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or stream.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input that parses but violates a contract (unknown ids, bad shapes, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values during training or scoring.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace capenrich
