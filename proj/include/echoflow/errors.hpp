#pragma once

#include <stdexcept>
#include <string>

namespace echoflow {

/// Base type for every error raised by the library. The pipeline runner
/// prefixes messages with the stage that raised them.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration values (bad protocol, unphysical phantom, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Data violates a documented invariant (dimension mismatch, non-monotone
/// timestamps, degenerate split, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text (CSV cell, PGM header).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Filesystem-level failure; message names the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure (singular system, factorization breakdown).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A feature channel with zero variance cannot be standardized.
class DegenerateChannelError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// No feature point survived tracking to the final frame.
class EmptyAliveError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace echoflow
