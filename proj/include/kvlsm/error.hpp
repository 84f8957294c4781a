// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace kvlsm {

enum class ErrorCode {
  kUsage,
  kCorruption,
  kIo,
  kStaleLocation,
  kUnrecoverable,
};

const char* error_code_name(ErrorCode code) noexcept;

/// Base class of every error raised by the library. The code lets callers
/// (and the Python binding) dispatch without RTTI on the concrete type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Precondition violated by the caller.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorCode::kUsage, what) {}
};

/// On-disk bytes failed a checksum or framing check.
class CorruptionError : public Error {
 public:
  explicit CorruptionError(const std::string& what) : Error(ErrorCode::kCorruption, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::kIo, what) {}
};

/// A tensor location refers to a file that no longer exists.
class StaleLocationError : public Error {
 public:
  explicit StaleLocationError(const std::string& what)
      : Error(ErrorCode::kStaleLocation, what) {}
};

/// Neither the current nor the previous manifest could be loaded.
class UnrecoverableError : public Error {
 public:
  explicit UnrecoverableError(const std::string& what)
      : Error(ErrorCode::kUnrecoverable, what) {}
};

}  // namespace kvlsm
