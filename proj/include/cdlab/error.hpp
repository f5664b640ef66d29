#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cdlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed profile expression or configuration text.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Input lies outside the domain where a formula is defined
/// (for example a singular column where f vanishes).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A numerical self-audit failed. This indicates an implementation bug or
/// parameters outside the regime where the construction is valid.
class AuditError : public Error {
 public:
  using Error::Error;
};

}  // namespace cdlab
