// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvlsm/error.hpp"

namespace kvlsm {

const char* error_code_name(ErrorCode code) noexcept
{
  switch (code) {
    case ErrorCode::kUsage:
      return "usage";
    case ErrorCode::kCorruption:
      return "corruption";
    case ErrorCode::kIo:
      return "io";
    case ErrorCode::kStaleLocation:
      return "stale_location";
    case ErrorCode::kUnrecoverable:
      return "unrecoverable";
  }
  return "unknown";
}

}  // namespace kvlsm
