#pragma once

#include <stdexcept>
#include <string>

namespace recon {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand sizes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A matrix, weight vector or hierarchy violates its structural invariants.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// The Gram (or Schur complement) matrix could not be factorized.
class SingularError : public Error {
 public:
  SingularError(const std::string& what, long dependent_row)
      : Error(what), dependent_row_(dependent_row) {}

  /// Constraint row detected as linearly dependent on earlier rows, or -1.
  long dependent_row() const noexcept { return dependent_row_; }

 private:
  long dependent_row_;
};

/// Malformed file content; carries file and line context in the message.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace recon
