#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace abfr {

// Root of every error the library throws. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

enum class ParseErrorKind { io, bad_magic, bad_version, truncated, dim_overflow, malformed };

class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  ParseErrorKind kind() const noexcept { return kind_; }

 private:
  ParseErrorKind kind_;
};

// Raised when a rejection-sampling loop runs out of attempts.
class NoValidPlacement : public Error {
 public:
  NoValidPlacement(std::size_t achieved, std::size_t requested, const std::string& what)
      : Error(what + " (placed " + std::to_string(achieved) + " of " +
              std::to_string(requested) + ")"),
        achieved_(achieved),
        requested_(requested) {}
  std::size_t achieved() const noexcept { return achieved_; }
  std::size_t requested() const noexcept { return requested_; }

 private:
  std::size_t achieved_;
  std::size_t requested_;
};

// A patch whose intersection with the gray-matter mask is empty.
class EmptyPatch : public Error {
 public:
  using Error::Error;
};

class StratificationError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UndefinedAuc : public Error {
 public:
  using Error::Error;
};

}  // namespace abfr
