#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace alq {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-range input data (dataset files, labels).
class IngestError : public Error {
public:
  using Error::Error;
};

/// Invalid layer geometry or tensor shape mismatch.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// Non-finite values or training divergence.
class NumericError : public Error {
public:
  using Error::Error;
};

/// Invalid configuration values.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Binary container errors. Carries the byte offset where decoding failed.
class FormatError : public Error {
public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

}  // namespace alq
