// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsm/bloom.hpp"

#include <algorithm>
#include <cmath>

#include "kvlsm/error.hpp"
#include "kvlsm/keycodec.hpp"

namespace kvlsm::lsm {

namespace {

std::uint64_t mix64(std::uint64_t x) noexcept
{
  // splitmix64 finalizer
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

}  // namespace

std::uint64_t bloom_hash(std::string_view key) noexcept
{
  return mix64(fnv1a64(as_bytes(key)));
}

BloomFilter BloomFilter::build(std::span<const std::uint64_t> key_hashes,
                               std::uint32_t bits_per_key)
{
  if (bits_per_key == 0) {
    throw UsageError("bloom bits_per_key must be positive");
  }
  BloomFilter f;
  const double k = std::round(bits_per_key * 0.69314718055994530942);
  f.num_probes_ = static_cast<std::uint32_t>(std::clamp(k, 1.0, 30.0));
  const std::uint64_t bits = std::max<std::uint64_t>(64, key_hashes.size() * bits_per_key);
  f.bits_.assign((bits + 7) / 8, 0);
  const std::uint64_t m = f.num_bits();
  for (std::uint64_t h : key_hashes) {
    const std::uint64_t delta = mix64(h ^ 0x9e3779b97f4a7c15ULL) | 1;
    std::uint64_t pos = h;
    for (std::uint32_t i = 0; i < f.num_probes_; ++i) {
      const std::uint64_t bit = pos % m;
      f.bits_[bit >> 3] |= static_cast<std::uint8_t>(1u << (bit & 7));
      pos += delta;
    }
  }
  return f;
}

bool BloomFilter::may_contain_hash(std::uint64_t h) const noexcept
{
  if (bits_.empty()) {
    return true;
  }
  const std::uint64_t m = num_bits();
  const std::uint64_t delta = mix64(h ^ 0x9e3779b97f4a7c15ULL) | 1;
  std::uint64_t pos = h;
  for (std::uint32_t i = 0; i < num_probes_; ++i) {
    const std::uint64_t bit = pos % m;
    if ((bits_[bit >> 3] & (1u << (bit & 7))) == 0) {
      return false;
    }
    pos += delta;
  }
  return true;
}

void BloomFilter::encode(Bytes& out) const
{
  put_fixed32(out, num_probes_);
  put_bytes(out, ByteView(bits_));
}

BloomFilter BloomFilter::decode(ByteView data)
{
  ByteReader in(data, "bloom filter");
  BloomFilter f;
  f.num_probes_ = in.u32();
  if (f.num_probes_ == 0 || f.num_probes_ > 30) {
    throw CorruptionError("bloom filter: bad probe count " + std::to_string(f.num_probes_));
  }
  ByteView bits = in.take(in.remaining());
  f.bits_.assign(bits.begin(), bits.end());
  return f;
}

}  // namespace kvlsm::lsm
