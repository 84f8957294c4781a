// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kvlsm/fault.hpp"
#include "kvlsm/lsm_index.hpp"
#include "lsm/bloom.hpp"
#include "lsm/cursor.hpp"
#include "util/file.hpp"

namespace kvlsm::lsm {

// Run file layout:
//   [data blocks][fence index][bloom filter][footer (56 bytes)]
// Data block:   [entry_count u32] { [key_len u32][key][IndexEntry 21B] }* [crc32c u32]
// Fence index:  [block_count u32] { [offset u64][length u32][key_len u32][first key] }*
//               [key_len u32][last key]
// Bloom:        [num_probes u32][bits]
// Footer:       magic "KVLSMRUN" | format_version u32 | entry_count u64 | block_count u32 |
//               fence_offset u64 | fence_length u32 | bloom_offset u64 | bloom_length u32 |
//               meta_crc32c u32 (fence + bloom bytes) | footer_crc32c u32

inline constexpr char kRunMagic[8] = {'K', 'V', 'L', 'S', 'M', 'R', 'U', 'N'};
inline constexpr std::uint32_t kRunFormatVersion = 1;

struct RunFooter {
  static constexpr std::size_t kSize = 56;

  std::uint64_t entry_count = 0;
  std::uint32_t block_count = 0;
  std::uint64_t fence_offset = 0;
  std::uint32_t fence_length = 0;
  std::uint64_t bloom_offset = 0;
  std::uint32_t bloom_length = 0;
  std::uint32_t meta_crc32c = 0;

  Bytes encode() const;
  static RunFooter decode(ByteView data, std::string_view what);
};

std::string run_file_name(std::uint64_t run_id);

struct ReadCounters {
  std::atomic<std::uint64_t> bloom_probes{0};
  std::atomic<std::uint64_t> bloom_negatives{0};
  std::atomic<std::uint64_t> data_block_reads{0};
};

/// Streams strictly increasing (key, entry) pairs into a new run file.
class RunBuilder {
 public:
  RunBuilder(const std::filesystem::path& path, std::uint32_t bloom_bits_per_key);

  void add(std::string_view key, const IndexEntry& entry);

  std::uint64_t entry_count() const noexcept { return entry_count_; }

  /// Writes fence index, bloom filter and footer, then fsyncs.
  RunInfo finish(std::uint64_t run_id);

 private:
  void flush_block();

  std::filesystem::path path_;
  std::uint32_t bloom_bits_;
  util::File file_;
  std::uint64_t offset_ = 0;
  Bytes block_;
  std::uint32_t block_entries_ = 0;
  std::string block_first_key_;
  struct Fence {
    std::uint64_t offset;
    std::uint32_t length;
    std::string first_key;
  };
  std::vector<Fence> fences_;
  std::vector<std::uint64_t> hashes_;
  std::string min_key_;
  std::string last_key_;
  std::uint64_t entry_count_ = 0;
  std::uint64_t logical_bytes_ = 0;
};

/// Immutable, opened sorted run. Fence index and bloom filter are held in
/// memory; data blocks are read on demand.
class Run : public std::enable_shared_from_this<Run> {
 public:
  using Block = std::vector<std::pair<std::string, IndexEntry>>;

  static std::shared_ptr<Run> open(const std::filesystem::path& path, const RunInfo& info);

  const RunInfo& info() const noexcept { return info_; }
  std::uint64_t id() const noexcept { return info_.run_id; }
  std::size_t block_count() const noexcept { return fences_.size(); }

  std::optional<IndexEntry> get(std::string_view key, ReadCounters& counters) const;

  /// Index of the last block whose first key is <= key, or block_count()
  /// when key sorts before every block.
  std::size_t find_block(std::string_view key) const;
  Block read_block(std::size_t index, ReadCounters& counters) const;

  /// Cursor positioned at the first key >= start.
  std::unique_ptr<Cursor> cursor(std::string_view start, ReadCounters& counters) const;

 private:
  struct Fence {
    std::uint64_t offset;
    std::uint32_t length;
    std::string first_key;
  };

  Run(util::File file, RunInfo info) : file_(std::move(file)), info_(std::move(info)) {}

  util::File file_;
  RunInfo info_;
  std::vector<Fence> fences_;
  BloomFilter bloom_;
};

}  // namespace kvlsm::lsm
