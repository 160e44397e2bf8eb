#pragma once

#include <stdexcept>
#include <string>

namespace fsrc {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input, violated precondition or unusable configuration.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or divergence during numerical work.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace fsrc
