#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace alcorpus {

// Bad input: wrong shapes, out-of-range parameters, duplicate ids.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed file contents. line() is 1-based; 0 when not tied to a line.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : ValidationError(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Upstream artifact produced under a different configuration.
class StalenessError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Non-finite values, singular matrices, failed convergence.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace alcorpus
