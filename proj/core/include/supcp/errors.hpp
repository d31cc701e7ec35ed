#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace supcp {

/// Malformed shapes, out-of-range modes, bad user input.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parameter values outside the model's domain (non-PSD covariance,
/// nonpositive noise variance).
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Estimation broke down: non-finite likelihood, degenerate component.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A loading column collapsed to zero during normalization.
class DegenerateComponent : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Bad file content. `position` is a byte offset for binary files and a
/// 1-based line number for text files.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t position)
      : std::runtime_error(what), position_(position) {}

  std::uint64_t position() const noexcept { return position_; }

 private:
  std::uint64_t position_;
};

}  // namespace supcp
