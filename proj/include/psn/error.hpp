#pragma once

#include <stdexcept>
#include <string>

namespace psn {

// Raised when a computation produces NaN/Inf (diverging learner, bad input).
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Raised for filesystem failures; the message carries the offending path.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace psn
