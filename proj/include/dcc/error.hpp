#pragma once

#include <stdexcept>
#include <string>

namespace dcc {

/// Bad input: malformed files, shape mismatches, invalid arguments,
/// inconsistent constraint sets. The CLI maps these to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public InputError {
 public:
  using InputError::InputError;
};

class FormatError : public InputError {
 public:
  using InputError::InputError;
};

class ArgumentError : public InputError {
 public:
  using InputError::InputError;
};

class ConsistencyError : public InputError {
 public:
  using InputError::InputError;
};

class GraphError : public InputError {
 public:
  using InputError::InputError;
};

/// Non-finite values produced during computation. Exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dcc
