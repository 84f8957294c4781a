// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>

#include "kvlsm/bytes.hpp"

namespace kvlsm {

/// CRC-32C (Castagnoli), the checksum used by every persisted structure.
std::uint32_t crc32c(ByteView data) noexcept;

inline std::uint32_t crc32c(std::string_view data) noexcept
{
  return crc32c(as_bytes(data));
}

}  // namespace kvlsm
