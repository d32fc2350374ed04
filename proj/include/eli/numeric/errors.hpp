#pragma once

#include <stdexcept>
#include <string>

namespace eli {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible matrix / layer / model dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents (bad magic, truncated payload, version mismatch).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Well-formed file whose contents fail a semantic check (e.g. checksum).
class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Wraps a failure raised inside a named pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace eli
