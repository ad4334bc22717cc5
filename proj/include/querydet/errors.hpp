#pragma once

#include <stdexcept>
#include <string>

namespace qd {

// Inconsistent dimensions, level ranges or option combinations.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Data that violates a type invariant (non-finite values, out-of-bounds keys).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or truncated fixture files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qd
