#pragma once

#include <stdexcept>
#include <string>

namespace ctiaug {

/// Bad input data or arguments. Maps to exit code 1 in the CLI.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A sentence that encodes to the all-zero vector, or an id the encoder
/// cannot serve. Callers decide whether to skip or abort.
class EncodingError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Non-finite loss or parameter during training. Maps to exit code 2.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ctiaug
