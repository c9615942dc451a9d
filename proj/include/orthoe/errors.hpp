#pragma once

#include <stdexcept>
#include <string>

namespace orthoe {

// Error hierarchy shared by every module. Each class maps to one failure
// category so callers (and the CLI) can report the kind of failure without
// parsing messages.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions are incompatible.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A computation produced or received a non-finite value, or did not converge.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition (orthogonality, tangency, ...) does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Gram-Schmidt met a numerically dependent column.
class DegeneracyError : public Error {
 public:
  DegeneracyError(const std::string& what, std::size_t column)
      : Error(what), column_(column) {}
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

/// Malformed input file; line is 1-based (0 when not applicable).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Unknown entity or relation name.
class VocabularyError : public Error {
 public:
  using Error::Error;
};

/// Id outside the vocabulary range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Invalid model or training configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Violated evaluation protocol (empty split, filtered-out target, ...).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint and dataset (or two artifacts) disagree.
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace orthoe
