// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace spil {

/// Base class for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text (pose file, config, manifest). Carries a line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent configuration (widths that do not chain, bad ranges).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File-system or checkpoint-integrity failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace spil
