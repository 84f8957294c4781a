// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kvlsm/bytes.hpp"
#include "kvlsm/keycodec.hpp"
#include "kvlsm/stats.hpp"

namespace kvlsm {

struct ProbeResult {
  std::size_t matched_blocks = 0;
  std::size_t matched_tokens = 0;
};

/// The three-operation cache contract shared by the LSM engine and the
/// file-per-object baseline.
class CacheBackend {
 public:
  virtual ~CacheBackend() = default;

  /// Stores one payload per full block of `tokens`. Blocks already present
  /// are skipped. Returns the number of blocks newly stored.
  virtual std::size_t put_batch(TokenSpan tokens, std::span<const ByteView> tensors) = 0;

  /// Longest stored prefix of `tokens`, in blocks.
  virtual ProbeResult probe(TokenSpan tokens) = 0;

  /// Payloads of the first `upto_blocks` blocks, in block order.
  virtual std::vector<Bytes> get_batch(TokenSpan tokens, std::size_t upto_blocks) = 0;

  /// Background work hook; returns true when something was done.
  virtual bool maintain() = 0;

  /// Counters since the last window reset.
  virtual OpStats snapshot_stats() const = 0;
  /// Counters since open.
  virtual OpStats total_stats() const = 0;

  virtual std::size_t file_count() const = 0;
  virtual std::uint64_t disk_bytes() const = 0;
  virtual std::string name() const = 0;
  virtual std::size_t block_tokens() const = 0;
};

}  // namespace kvlsm
