#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace graphdiff {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed SMILES. `position` is the 0-based byte offset of the offending
// character.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, const std::string &message)
      : Error("SMILES syntax error at position " + std::to_string(position) +
              ": " + message),
        position_(position), detail_(message) {}

  std::size_t position() const noexcept { return position_; }
  const std::string &detail() const noexcept { return detail_; }

 private:
  std::size_t position_;
  std::string detail_;
};

class SizeError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class RangeError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };
class SchemaError : public Error { using Error::Error; };
class EmptyDataset : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class NonScalarLoss : public Error { using Error::Error; };
class EmptyInput : public Error { using Error::Error; };
class TooFew : public Error { using Error::Error; };
class LengthMismatch : public Error { using Error::Error; };
class EmptyFit : public Error { using Error::Error; };
class CompatibilityError : public Error { using Error::Error; };

}  // namespace graphdiff
