#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace retina {

/// Process exit codes used by the CLI. Stable contract for scripting.
enum class ExitCode : int {
  kSuccess = 0,
  kValidation = 1,
  kRuntime = 2,
  kIo = 3,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept = 0;
};

/// A precondition on caller-supplied data or configuration was violated.
class InvalidInput : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kValidation; }
};

/// Non-finite values or other numeric breakdown during a computation.
class NumericError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kRuntime; }
};

class IoError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kIo; }
};

/// Malformed file contents. Carries the byte offset (or line number for
/// line-oriented formats) where parsing stopped.
class ParseError : public InvalidInput {
 public:
  enum class Kind {
    kMalformedHeader,
    kTruncated,
    kUnsupportedMaxval,
    kUnsupportedVariant,
    kMalformedRecord,
    kBadMagic,
    kBadVersion,
  };

  ParseError(Kind kind, std::size_t position, const std::string& what)
      : InvalidInput(what + " (at " + std::to_string(position) + ")"),
        kind_(kind),
        position_(position) {}

  Kind kind() const noexcept { return kind_; }
  std::size_t position() const noexcept { return position_; }

 private:
  Kind kind_;
  std::size_t position_;
};

}  // namespace retina
