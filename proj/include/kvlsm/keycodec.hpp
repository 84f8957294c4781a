// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kvlsm/bytes.hpp"

namespace kvlsm {

using TokenId = std::uint32_t;
using TokenSpan = std::span<const TokenId>;

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;
inline constexpr std::size_t kDigestBytes = 8;
inline constexpr std::size_t kMaxKeyDepth = 65535;

/// FNV-1a 64 over raw bytes.
std::uint64_t fnv1a64(ByteView data) noexcept;

struct BlockDigest {
  std::uint64_t value = 0;

  friend constexpr auto operator<=>(BlockDigest, BlockDigest) = default;
};

/// Byte key for a chain of block digests: the big-endian digests
/// concatenated, so byte order on keys is prefix order on chains.
class PrefixKey {
 public:
  PrefixKey() = default;

  /// Adopts already-encoded bytes. Throws CorruptionError unless the length
  /// is a non-zero multiple of 8.
  static PrefixKey from_bytes(std::string bytes);

  const std::string& bytes() const noexcept { return bytes_; }
  std::size_t size() const noexcept { return bytes_.size(); }
  std::uint16_t depth() const noexcept
  {
    return static_cast<std::uint16_t>(bytes_.size() / kDigestBytes);
  }

  /// The key of the first `depth` blocks of this chain.
  PrefixKey truncated(std::size_t depth) const;

  friend auto operator<=>(const PrefixKey&, const PrefixKey&) = default;
  friend bool operator==(const PrefixKey&, const PrefixKey&) = default;

 private:
  friend PrefixKey encode_key(std::span<const BlockDigest> chain);

  explicit PrefixKey(std::string bytes) : bytes_(std::move(bytes)) {}

  std::string bytes_;
};

/// Full blocks of `block_tokens` tokens; the trailing partial block is dropped.
std::vector<TokenSpan> chunk_tokens(TokenSpan tokens, std::size_t block_tokens);

inline std::size_t full_block_count(TokenSpan tokens, std::size_t block_tokens)
{
  return block_tokens == 0 ? 0 : tokens.size() / block_tokens;
}

/// FNV-1a 64 over the big-endian 4-byte encodings of the tokens.
/// Throws UsageError if `block.size() != block_tokens`.
BlockDigest block_digest(TokenSpan block, std::size_t block_tokens);

/// Throws UsageError for an empty chain or one deeper than 65535 blocks.
PrefixKey encode_key(std::span<const BlockDigest> chain);

/// Block count of an encoded key. Throws CorruptionError when the length is
/// not a multiple of 8.
std::size_t key_depth(std::string_view key_bytes);

/// Keys for chain depths 1..D of the chunked sequence, in depth order.
std::vector<PrefixKey> chain_keys(TokenSpan tokens, std::size_t block_tokens);

}  // namespace kvlsm
