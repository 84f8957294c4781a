// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kvlsm/error.hpp"

namespace kvlsm {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView as_bytes(std::string_view s) noexcept
{
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline std::string_view as_chars(ByteView b) noexcept
{
  return {reinterpret_cast<const char*>(b.data()), b.size()};
}

// Little-endian fixed-width helpers. All on-disk integers are little-endian
// except PrefixKey bytes, which are big-endian digests by construction.

template <typename Buf>
void put_fixed16(Buf& out, std::uint16_t v)
{
  out.push_back(static_cast<typename Buf::value_type>(v & 0xff));
  out.push_back(static_cast<typename Buf::value_type>(v >> 8));
}

template <typename Buf>
void put_fixed32(Buf& out, std::uint32_t v)
{
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<typename Buf::value_type>((v >> (8 * i)) & 0xff));
  }
}

template <typename Buf>
void put_fixed64(Buf& out, std::uint64_t v)
{
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<typename Buf::value_type>((v >> (8 * i)) & 0xff));
  }
}

template <typename Buf>
void put_bytes(Buf& out, std::string_view s)
{
  out.insert(out.end(), s.begin(), s.end());
}

template <typename Buf>
void put_bytes(Buf& out, ByteView s)
{
  out.insert(out.end(), s.begin(), s.end());
}

inline std::uint16_t decode_fixed16(const std::uint8_t* p) noexcept
{
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t decode_fixed32(const std::uint8_t* p) noexcept
{
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint64_t decode_fixed64(const std::uint8_t* p) noexcept
{
  return static_cast<std::uint64_t>(decode_fixed32(p)) |
         (static_cast<std::uint64_t>(decode_fixed32(p + 4)) << 32);
}

/// Bounds-checked cursor over a byte buffer. Any overrun is reported as
/// corruption because every caller is parsing persisted data.
class ByteReader {
 public:
  ByteReader(ByteView data, std::string_view what) : data_(data), what_(what) {}

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }
  bool empty() const noexcept { return remaining() == 0; }

  std::uint8_t u8()
  {
    need(1);
    return data_[pos_++];
  }

  std::uint16_t u16()
  {
    need(2);
    auto v = decode_fixed16(data_.data() + pos_);
    pos_ += 2;
    return v;
  }

  std::uint32_t u32()
  {
    need(4);
    auto v = decode_fixed32(data_.data() + pos_);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64()
  {
    need(8);
    auto v = decode_fixed64(data_.data() + pos_);
    pos_ += 8;
    return v;
  }

  ByteView take(std::size_t n)
  {
    need(n);
    auto v = data_.subspan(pos_, n);
    pos_ += n;
    return v;
  }

  std::string take_string(std::size_t n)
  {
    auto v = take(n);
    return std::string(as_chars(v));
  }

 private:
  void need(std::size_t n) const
  {
    if (remaining() < n) {
      throw CorruptionError(std::string(what_) + ": truncated (need " + std::to_string(n) +
                            " bytes, have " + std::to_string(remaining()) + ")");
    }
  }

  ByteView data_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace kvlsm
