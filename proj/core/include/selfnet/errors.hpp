#pragma once

#include <stdexcept>
#include <string>

namespace selfnet {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Tensor/layer dimension mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Caller passed an invalid value (bad label, non-positive chunk size, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// Non-finite value encountered where a finite one is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Malformed file (bad magic, truncation, inconsistent lengths).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Checkpoint written by an unsupported format version.
class VersionError : public Error {
 public:
  using Error::Error;
};

// Internally inconsistent metadata (e.g. subvector bookkeeping).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// Lookup of an unknown task or item.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Bad experiment configuration (unknown key, type mismatch, missing file).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace selfnet
