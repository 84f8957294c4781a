// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsm/wal.hpp"

#include "kvlsm/crc32c.hpp"
#include "kvlsm/error.hpp"

namespace kvlsm::lsm {

Bytes encode_wal_record(std::uint64_t seq, std::span<const IndexPair> pairs)
{
  Bytes payload;
  put_fixed64(payload, seq);
  put_fixed32(payload, static_cast<std::uint32_t>(pairs.size()));
  for (const auto& [key, entry] : pairs) {
    put_fixed32(payload, static_cast<std::uint32_t>(key.size()));
    put_bytes(payload, key.bytes());
    encode_index_entry(payload, entry);
  }
  Bytes out;
  out.reserve(payload.size() + 8);
  put_fixed32(out, static_cast<std::uint32_t>(payload.size()));
  put_fixed32(out, crc32c(ByteView(payload)));
  put_bytes(out, ByteView(payload));
  return out;
}

std::unique_ptr<Wal> Wal::open(const std::filesystem::path& path, FaultInjector* fault,
                               const std::function<void(WalBatch&&)>& replay)
{
  std::unique_ptr<Wal> wal(new Wal(util::File::open_rw(path), fault));
  const std::uint64_t file_size = wal->file_.size();
  Bytes data(file_size);
  if (file_size > 0) {
    wal->file_.pread_exact(data.data(), data.size(), 0);
  }

  std::uint64_t pos = 0;
  while (pos + 8 <= file_size) {
    const std::uint32_t len = decode_fixed32(data.data() + pos);
    const std::uint32_t crc = decode_fixed32(data.data() + pos + 4);
    if (pos + 8 + len > file_size) {
      break;
    }
    ByteView payload(data.data() + pos + 8, len);
    if (crc32c(payload) != crc) {
      break;
    }
    ByteReader in(payload, "wal record");
    WalBatch batch;
    batch.seq = in.u64();
    const std::uint32_t count = in.u32();
    batch.pairs.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      PrefixKey key = PrefixKey::from_bytes(in.take_string(in.u32()));
      IndexEntry e = decode_index_entry(in);
      batch.pairs.emplace_back(std::move(key), e);
    }
    replay(std::move(batch));
    pos += 8 + len;
  }
  if (pos != file_size) {
    wal->file_.truncate(pos);
    wal->file_.sync();
  }
  wal->size_ = pos;
  return wal;
}

void Wal::append(std::uint64_t seq, std::span<const IndexPair> pairs)
{
  Bytes rec = encode_wal_record(seq, pairs);
  const std::uint64_t start = size_;
  try {
    if (fault_fires(fault_, "wal.append.torn")) {
      file_.pwrite_all(ByteView(rec).first(rec.size() / 2), start);
      fault_->raise("wal.append.torn");
    }
    file_.pwrite_all(rec, start);
    fault_point(fault_, "wal.append.before_sync");
    file_.sync();
  } catch (const Error&) {
    try {
      file_.truncate(start);
    } catch (const Error&) {
    }
    throw;
  }
  size_ = start + rec.size();
  bytes_written_ += rec.size();
  ++syncs_;
}

void Wal::reset()
{
  file_.truncate(0);
  file_.sync();
  size_ = 0;
}

}  // namespace kvlsm::lsm
