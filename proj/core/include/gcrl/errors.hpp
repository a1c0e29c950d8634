#pragma once

#include <stdexcept>
#include <string>

namespace gcrl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration: mismatched layer lists, bad hyperparameters,
// unknown variant names, out-of-range physics constants.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dimension mismatch between a network, its inputs, or its gradients.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf in a loss or gradient. Updates that raise this leave their
// inputs untouched.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Operation not valid in the current state (stepping a finished episode,
// sampling an empty buffer, evaluating zero episodes).
class StateError : public Error {
 public:
  using Error::Error;
};

// Malformed serialized data. `section()` names the part of the document
// that failed to parse.
class ParseError : public Error {
 public:
  ParseError(std::string section, const std::string& what)
      : Error(section + ": " + what), section_(std::move(section)) {}

  const std::string& section() const noexcept { return section_; }

 private:
  std::string section_;
};

}  // namespace gcrl
