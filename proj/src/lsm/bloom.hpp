// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "kvlsm/bytes.hpp"

namespace kvlsm::lsm {

/// Hash used to place keys in the filter. Computed once per key at build time.
std::uint64_t bloom_hash(std::string_view key) noexcept;

/// Standard bloom filter with k = round(bits_per_key * ln 2) probes placed by
/// double hashing. Serialized as [num_probes u32][bit bytes].
class BloomFilter {
 public:
  BloomFilter() = default;

  static BloomFilter build(std::span<const std::uint64_t> key_hashes, std::uint32_t bits_per_key);
  static BloomFilter decode(ByteView data);

  bool may_contain(std::string_view key) const noexcept { return may_contain_hash(bloom_hash(key)); }
  bool may_contain_hash(std::uint64_t h) const noexcept;

  void encode(Bytes& out) const;

  std::uint32_t num_probes() const noexcept { return num_probes_; }
  std::uint64_t num_bits() const noexcept { return bits_.size() * 8; }

 private:
  std::uint32_t num_probes_ = 1;
  Bytes bits_;
};

}  // namespace kvlsm::lsm
