// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvlsm/codec.hpp"

#include <zlib.h>

#include <algorithm>
#include <limits>
#include <string>

#include "kvlsm/error.hpp"

namespace kvlsm {

namespace {

Bytes frame(std::span<const ByteView> payloads, std::vector<std::uint32_t>& offsets)
{
  std::size_t total = 4 + 4 * payloads.size();
  for (ByteView p : payloads) {
    total += p.size();
  }
  if (total > std::numeric_limits<std::uint32_t>::max()) {
    throw UsageError("batch exceeds 4 GiB framed size");
  }
  Bytes out;
  out.reserve(total);
  put_fixed32(out, static_cast<std::uint32_t>(payloads.size()));
  for (ByteView p : payloads) {
    put_fixed32(out, static_cast<std::uint32_t>(p.size()));
  }
  offsets.clear();
  offsets.reserve(payloads.size());
  for (ByteView p : payloads) {
    offsets.push_back(static_cast<std::uint32_t>(out.size()));
    put_bytes(out, p);
  }
  return out;
}

std::vector<Bytes> unframe(ByteView framed)
{
  ByteReader in(framed, "codec frame");
  const std::uint32_t count = in.u32();
  if (count > in.remaining() / 4) {
    throw CorruptionError("codec frame: item count " + std::to_string(count) +
                          " exceeds frame size");
  }
  std::vector<std::uint32_t> lens(count);
  for (auto& len : lens) {
    len = in.u32();
  }
  std::vector<Bytes> items;
  items.reserve(count);
  for (std::uint32_t len : lens) {
    ByteView v = in.take(len);
    items.emplace_back(v.begin(), v.end());
  }
  if (!in.empty()) {
    throw CorruptionError("codec frame: " + std::to_string(in.remaining()) + " trailing bytes");
  }
  return items;
}

Bytes deflate_all(ByteView in, int level)
{
  uLongf bound = compressBound(static_cast<uLong>(in.size()));
  Bytes out(bound);
  int rc = compress2(out.data(), &bound, in.data(), static_cast<uLong>(in.size()), level);
  if (rc != Z_OK) {
    throw UsageError("zlib compress2 failed with code " + std::to_string(rc));
  }
  out.resize(bound);
  return out;
}

Bytes inflate_all(ByteView in)
{
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) {
    throw CorruptionError("zlib inflateInit failed");
  }
  Bytes out;
  out.resize(std::max<std::size_t>(in.size() * 4, 256));
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    if (zs.total_out == out.size()) {
      out.resize(out.size() * 2);
    }
    zs.next_out = out.data() + zs.total_out;
    zs.avail_out = static_cast<uInt>(out.size() - zs.total_out);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc == Z_BUF_ERROR && zs.avail_in == 0) {
      inflateEnd(&zs);
      throw CorruptionError("zlib stream truncated");
    }
    if (rc != Z_OK && rc != Z_STREAM_END && rc != Z_BUF_ERROR) {
      inflateEnd(&zs);
      throw CorruptionError("zlib inflate failed with code " + std::to_string(rc));
    }
  }
  const bool trailing = zs.avail_in != 0;
  out.resize(zs.total_out);
  inflateEnd(&zs);
  if (trailing) {
    throw CorruptionError("zlib stream followed by trailing bytes");
  }
  return out;
}

}  // namespace

CodecId codec_from_byte(std::uint8_t id)
{
  switch (id) {
    case 0:
      return CodecId::kRaw;
    case 1:
      return CodecId::kZlib;
    default:
      throw CorruptionError("unknown codec id " + std::to_string(id));
  }
}

EncodedBatch encode_batch(std::span<const ByteView> payloads, CodecId codec, int zlib_level)
{
  EncodedBatch out;
  if (payloads.empty()) {
    return out;
  }
  Bytes framed = frame(payloads, out.offsets);
  out.raw_len = static_cast<std::uint32_t>(framed.size());
  switch (codec) {
    case CodecId::kRaw:
      out.bytes = std::move(framed);
      break;
    case CodecId::kZlib:
      out.bytes = deflate_all(framed, zlib_level);
      break;
  }
  return out;
}

std::vector<Bytes> decode_batch(ByteView stored, CodecId codec)
{
  if (stored.empty()) {
    return {};
  }
  switch (codec) {
    case CodecId::kRaw:
      return unframe(stored);
    case CodecId::kZlib:
      return unframe(inflate_all(stored));
  }
  throw CorruptionError("unknown codec");
}

std::vector<Bytes> decode_batch(ByteView stored, std::uint8_t codec_id)
{
  return decode_batch(stored, codec_from_byte(codec_id));
}

}  // namespace kvlsm
