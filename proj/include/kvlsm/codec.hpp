// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kvlsm/bytes.hpp"

namespace kvlsm {

/// Persisted in every log record; never renumber.
enum class CodecId : std::uint8_t {
  kRaw = 0,
  kZlib = 1,
};

/// Throws CorruptionError for an id this build cannot decode.
CodecId codec_from_byte(std::uint8_t id);

struct EncodedBatch {
  Bytes bytes;                        // stored form (compressed when codec != raw)
  std::vector<std::uint32_t> offsets; // start of each payload in the framed stream
  std::uint32_t raw_len = 0;          // size of the framed stream before compression
};

/// Frames the payloads as [count u32][len u32]*count[payload bytes...]
/// (little-endian) and, for kZlib, deflates the framed stream as one unit.
EncodedBatch encode_batch(std::span<const ByteView> payloads, CodecId codec,
                          int zlib_level = 6);

/// Exact inverse of encode_batch. Framing or decompression failure, and an
/// unknown codec, are corruption.
std::vector<Bytes> decode_batch(ByteView stored, CodecId codec);
std::vector<Bytes> decode_batch(ByteView stored, std::uint8_t codec_id);

}  // namespace kvlsm
