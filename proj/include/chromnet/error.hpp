#pragma once

#include <stdexcept>
#include <string>

namespace chromnet {

/// Base of every error raised by the library. The CLI maps the concrete
/// subclasses onto its exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text; the message names the offending line.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed rows that do not assemble into a consistent dataset.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Column layout differs from what the caller expected (mark names).
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Input outside the domain of an operation (empty set, single class, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Incompatible shapes between tensors, parameters or hyperparameters.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Model file written by an incompatible format version.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Model file truncated or corrupted.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Non-finite objective during input optimization.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace chromnet
