// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "kvlsm/fault.hpp"
#include "kvlsm/lsm_index.hpp"
#include "util/file.hpp"

namespace kvlsm::lsm {

// WAL record: [len u32][crc32c(payload) u32][payload], little-endian.
// Payload:    [seq u64][count u32] { [key_len u32][key][IndexEntry 21B] }*
Bytes encode_wal_record(std::uint64_t seq, std::span<const IndexPair> pairs);

struct WalBatch {
  std::uint64_t seq = 0;
  std::vector<IndexPair> pairs;
};

class Wal {
 public:
  /// Opens `path`, handing every intact batch to `replay` in log order. The
  /// file is truncated at the first record that fails its length or checksum
  /// test (a torn tail from a crash mid-append).
  static std::unique_ptr<Wal> open(const std::filesystem::path& path, FaultInjector* fault,
                                   const std::function<void(WalBatch&&)>& replay);

  /// Appends one batch and fsyncs. On failure the file is cut back to its
  /// previous length before the error propagates.
  void append(std::uint64_t seq, std::span<const IndexPair> pairs);

  /// Drops every record (after a flush made them redundant).
  void reset();

  std::uint64_t size() const noexcept { return size_; }
  std::uint64_t bytes_written() const noexcept { return bytes_written_; }
  std::uint64_t syncs() const noexcept { return syncs_; }

 private:
  Wal(util::File file, FaultInjector* fault) : file_(std::move(file)), fault_(fault) {}

  util::File file_;
  FaultInjector* fault_;
  std::uint64_t size_ = 0;
  std::uint64_t bytes_written_ = 0;
  std::uint64_t syncs_ = 0;
};

}  // namespace kvlsm::lsm
