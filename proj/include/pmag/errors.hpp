#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pmag {

// Every error raised by the library derives from Error. The CLI maps the
// three families below onto exit codes 2, 3 and 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unreadable files.
class FormatError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFormatError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncationError : public FormatError {
 public:
  using FormatError::FormatError;
};

class IoError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Well-formed input that violates a precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class RangeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EmptyDomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Failure inside an attention provider during refinement.
class ProviderError : public Error {
 public:
  ProviderError(std::size_t iteration, const std::string& what)
      : Error("provider failed at iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace pmag
