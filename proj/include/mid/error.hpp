//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <stdexcept>
#include <string>

namespace mid {

// Base of every error the library throws. `code()` is a stable,
// machine-readable tag surfaced by the CLI and the HTTP service.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string &message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string &code() const noexcept { return code_; }

 private:
  std::string code_;
};

// Malformed user input: SMILES, CSV, rule files, parameters.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string &message,
                           std::string code = "validation_error")
      : Error(std::move(code), message) {}
};

class ParseError : public ValidationError {
 public:
  ParseError(const std::string &message, std::size_t position)
      : ValidationError(message + " at position " + std::to_string(position),
                        "parse_error"),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class LineageError : public Error {
 public:
  explicit LineageError(const std::string &message)
      : Error("lineage_violation", message) {}
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string &message)
      : Error("not_found", message) {}
};

class ConflictError : public Error {
 public:
  explicit ConflictError(const std::string &message)
      : Error("write_lock_conflict", message) {}
};

class CancelledError : public Error {
 public:
  CancelledError() : Error("cancelled", "operation cancelled") {}
};

}  // namespace mid
