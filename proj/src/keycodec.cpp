// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvlsm/keycodec.hpp"

#include "kvlsm/error.hpp"

namespace kvlsm {

namespace {

void append_be64(std::string& out, std::uint64_t v)
{
  for (int shift = 56; shift >= 0; shift -= 8) {
    out.push_back(static_cast<char>((v >> shift) & 0xff));
  }
}

}  // namespace

std::uint64_t fnv1a64(ByteView data) noexcept
{
  std::uint64_t h = kFnvOffsetBasis;
  for (std::uint8_t b : data) {
    h ^= b;
    h *= kFnvPrime;
  }
  return h;
}

PrefixKey PrefixKey::from_bytes(std::string bytes)
{
  if (bytes.empty()) {
    throw CorruptionError("prefix key is empty");
  }
  key_depth(bytes);
  return PrefixKey(std::move(bytes));
}

PrefixKey PrefixKey::truncated(std::size_t depth) const
{
  if (depth == 0 || depth > this->depth()) {
    throw UsageError("cannot truncate key of depth " + std::to_string(this->depth()) +
                     " to depth " + std::to_string(depth));
  }
  return PrefixKey(bytes_.substr(0, depth * kDigestBytes));
}

std::vector<TokenSpan> chunk_tokens(TokenSpan tokens, std::size_t block_tokens)
{
  if (block_tokens == 0) {
    throw UsageError("block_tokens must be positive");
  }
  std::vector<TokenSpan> blocks;
  const std::size_t n = tokens.size() / block_tokens;
  blocks.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    blocks.push_back(tokens.subspan(i * block_tokens, block_tokens));
  }
  return blocks;
}

BlockDigest block_digest(TokenSpan block, std::size_t block_tokens)
{
  if (block.size() != block_tokens) {
    throw UsageError("block has " + std::to_string(block.size()) + " tokens, expected " +
                     std::to_string(block_tokens));
  }
  std::uint64_t h = kFnvOffsetBasis;
  for (TokenId t : block) {
    for (int shift = 24; shift >= 0; shift -= 8) {
      h ^= (t >> shift) & 0xff;
      h *= kFnvPrime;
    }
  }
  return BlockDigest{h};
}

PrefixKey encode_key(std::span<const BlockDigest> chain)
{
  if (chain.empty()) {
    throw UsageError("cannot encode an empty digest chain");
  }
  if (chain.size() > kMaxKeyDepth) {
    throw UsageError("digest chain deeper than " + std::to_string(kMaxKeyDepth));
  }
  std::string bytes;
  bytes.reserve(chain.size() * kDigestBytes);
  for (BlockDigest d : chain) {
    append_be64(bytes, d.value);
  }
  return PrefixKey(std::move(bytes));
}

std::size_t key_depth(std::string_view key_bytes)
{
  if (key_bytes.size() % kDigestBytes != 0) {
    throw CorruptionError("key length " + std::to_string(key_bytes.size()) +
                          " is not a multiple of 8");
  }
  return key_bytes.size() / kDigestBytes;
}

std::vector<PrefixKey> chain_keys(TokenSpan tokens, std::size_t block_tokens)
{
  auto blocks = chunk_tokens(tokens, block_tokens);
  if (blocks.size() > kMaxKeyDepth) {
    throw UsageError("token sequence exceeds the maximum key depth");
  }
  std::vector<BlockDigest> chain;
  chain.reserve(blocks.size());
  for (TokenSpan b : blocks) {
    chain.push_back(block_digest(b, block_tokens));
  }
  std::vector<PrefixKey> keys;
  keys.reserve(chain.size());
  if (chain.empty()) {
    return keys;
  }
  // Encode the deepest key once; shallower keys are its byte prefixes.
  PrefixKey full = encode_key(chain);
  for (std::size_t depth = 1; depth < chain.size(); ++depth) {
    keys.push_back(full.truncated(depth));
  }
  keys.push_back(std::move(full));
  return keys;
}

}  // namespace kvlsm
