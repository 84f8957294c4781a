// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

// Plain-map reference model of the cache contract, and a random op driver
// shared by the engine, baseline and acceptance tests.

#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "kvlsm/backend.hpp"
#include "test_util.hpp"

namespace kvlsm::testing {

/// Maps a block-aligned token prefix to the payload stored for it.
class ReferenceModel {
 public:
  explicit ReferenceModel(std::size_t block_tokens) : bt_(block_tokens) {}

  std::size_t put(const std::vector<TokenId>& tokens, const std::vector<Bytes>& payloads)
  {
    std::size_t stored = 0;
    for (std::size_t i = 0; i < tokens.size() / bt_; ++i) {
      auto [it, inserted] = map_.try_emplace(prefix(tokens, i + 1), payloads[i]);
      stored += inserted ? 1 : 0;
    }
    return stored;
  }

  std::size_t probe(const std::vector<TokenId>& tokens) const
  {
    std::size_t d = 0;
    while (d < tokens.size() / bt_ && map_.count(prefix(tokens, d + 1))) {
      ++d;
    }
    return d;
  }

  std::vector<Bytes> get(const std::vector<TokenId>& tokens, std::size_t upto) const
  {
    std::vector<Bytes> out;
    for (std::size_t i = 0; i < upto; ++i) {
      out.push_back(map_.at(prefix(tokens, i + 1)));
    }
    return out;
  }

  std::size_t size() const { return map_.size(); }

 private:
  std::vector<TokenId> prefix(const std::vector<TokenId>& tokens, std::size_t blocks) const
  {
    return {tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(blocks * bt_)};
  }

  std::size_t bt_;
  std::map<std::vector<TokenId>, Bytes> map_;
};

/// Random token sequences that often share prefixes with earlier ones.
class SequenceGen {
 public:
  SequenceGen(std::uint64_t seed, std::size_t block_tokens, std::size_t max_blocks)
      : rng_(seed), bt_(block_tokens), max_blocks_(max_blocks)
  {
  }

  std::vector<TokenId> next()
  {
    std::vector<TokenId> out;
    if (!seen_.empty() && rng_() % 3 != 0) {
      const auto& base = seen_[rng_() % seen_.size()];
      out.assign(base.begin(), base.begin() + static_cast<std::ptrdiff_t>(rng_() % (base.size() + 1)));
    }
    const std::size_t target = rng_() % (max_blocks_ * bt_ + bt_);
    while (out.size() < target) {
      // Tiny vocabulary so independent sequences collide on early blocks too.
      out.push_back(static_cast<TokenId>(rng_() % 3));
    }
    if (out.size() > max_blocks_ * bt_ + bt_ - 1) {
      out.resize(max_blocks_ * bt_ + bt_ - 1);
    }
    seen_.push_back(out);
    if (seen_.size() > 64) {
      seen_.erase(seen_.begin());
    }
    return out;
  }

  std::vector<Bytes> payloads(std::size_t blocks, std::size_t max_len = 300)
  {
    std::vector<Bytes> out;
    for (std::size_t i = 0; i < blocks; ++i) {
      out.push_back(random_bytes(rng_, 1 + rng_() % max_len));
    }
    return out;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::size_t bt_;
  std::size_t max_blocks_;
  std::vector<std::vector<TokenId>> seen_;
};

inline std::vector<ByteView> views(const std::vector<Bytes>& payloads)
{
  return {payloads.begin(), payloads.end()};
}

}  // namespace kvlsm::testing
