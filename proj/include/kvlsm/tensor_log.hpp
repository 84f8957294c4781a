// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "kvlsm/bytes.hpp"
#include "kvlsm/codec.hpp"
#include "kvlsm/fault.hpp"
#include "kvlsm/keycodec.hpp"

namespace kvlsm {

namespace util {
class File;
}

/// Address of one immutable record in the tensor log. `length` is the full
/// on-disk size of the record, header included.
struct TensorLocation {
  std::uint32_t file_id = 0;
  std::uint64_t offset = 0;
  std::uint32_t length = 0;

  friend bool operator==(const TensorLocation&, const TensorLocation&) = default;
  friend auto operator<=>(const TensorLocation&, const TensorLocation&) = default;
};

// LogRecord layout (little-endian lengths, big-endian key bytes):
//   'T' 'L' 'G' '1' | key_depth u16 | key bytes (8 * depth) | codec_id u8 |
//   raw_len u32 | stored_len u32 | payload_crc32c u32 | payload (stored_len)
inline constexpr char kLogRecordMagic[4] = {'T', 'L', 'G', '1'};
inline constexpr std::size_t kLogRecordFixedBytes = 4 + 2 + 1 + 4 + 4 + 4;

inline std::size_t log_record_size(std::size_t key_bytes, std::size_t stored_len)
{
  return kLogRecordFixedBytes + key_bytes + stored_len;
}

struct LogAppend {
  const PrefixKey* key = nullptr;
  ByteView stored;                // payload as it goes to disk
  CodecId codec = CodecId::kRaw;
  std::uint32_t raw_len = 0;      // size before compression
};

struct LogRecord {
  PrefixKey key;
  CodecId codec = CodecId::kRaw;
  std::uint32_t raw_len = 0;
  std::uint32_t payload_crc32c = 0;
  Bytes payload;  // stored form
};

/// Serializes one record; exposed for golden-file tests.
Bytes encode_log_record(const PrefixKey& key, ByteView stored, CodecId codec,
                        std::uint32_t raw_len);

std::string tensor_log_file_name(std::uint32_t file_id);

struct TensorLogOptions {
  std::uint64_t file_cap = 256ull << 20;
  FaultInjector* fault = nullptr;
};

struct TensorLogStats {
  std::uint64_t append_batches = 0;
  std::uint64_t records_appended = 0;
  std::uint64_t bytes_appended = 0;
  std::uint64_t fsyncs = 0;
  std::uint64_t read_calls = 0;  // pread syscalls issued by read_batch
  std::uint64_t records_read = 0;
  std::uint64_t bytes_read = 0;
  std::uint64_t merge_bytes_copied = 0;
  std::uint64_t merge_bytes_reclaimed = 0;
  std::uint64_t merge_records_dropped = 0;
  std::uint64_t files_created = 0;
  std::uint64_t files_deleted = 0;
};

struct RemapEntry {
  PrefixKey key;
  TensorLocation from;
  TensorLocation to;
};

struct MergeResult {
  std::vector<RemapEntry> remap;
  /// Files whose live records were all copied; delete them with
  /// retire_files() once the index rewrite is durable.
  std::vector<std::uint32_t> retired;
  std::vector<std::uint32_t> created;
  std::uint64_t bytes_copied = 0;
  std::uint64_t bytes_reclaimed = 0;
  std::uint64_t records_dropped = 0;

  bool empty() const noexcept { return retired.empty() && created.empty(); }
};

/// Answers whether `key` currently maps to exactly `location` in the index.
using LiveCheck = std::function<bool(const PrefixKey& key, const TensorLocation& location)>;

/// Append-only payload store: the value half of key-value separation.
///
/// Single appender. Readers may run concurrently with appends and merges;
/// locations stay readable until retire_files() removes their file.
class TensorLog {
 public:
  /// Opens (or creates) the log in `dir`. The newest file becomes the active
  /// file and is truncated after its last intact record.
  static std::unique_ptr<TensorLog> open(const std::filesystem::path& dir,
                                         TensorLogOptions options);
  ~TensorLog();

  TensorLog(const TensorLog&) = delete;
  TensorLog& operator=(const TensorLog&) = delete;

  /// Writes the records contiguously in order, then fsyncs each file touched.
  std::vector<TensorLocation> append_batch(std::span<const LogAppend> records);

  /// Payloads in request order. Adjacent locations in one file are read with
  /// a single pread. Every record is checksum-verified.
  std::vector<LogRecord> read_batch(std::span<const TensorLocation> locations) const;

  /// Rewrites the smallest adjacent closed files (by file id) into
  /// consolidated files holding only live records, until the file count is
  /// at most `max_files` (>= 2). Outputs respect file_cap unless the count
  /// cannot be met otherwise. Old files are left in place; see
  /// MergeResult::retired.
  MergeResult merge_files(const LiveCheck& live, std::size_t max_files);

  void retire_files(std::span<const std::uint32_t> file_ids);

  std::size_t file_count() const;
  std::vector<std::uint32_t> file_ids() const;
  std::uint64_t total_bytes() const;
  std::uint64_t file_cap() const noexcept { return options_.file_cap; }

  /// Sequential scan of every intact record in one file. Stops at the first
  /// record that fails framing or checksum (a torn tail).
  void scan_file(std::uint32_t file_id,
                 const std::function<void(const LogRecord&, const TensorLocation&)>& fn) const;

  TensorLogStats stats() const;

 private:
  struct FileInfo {
    std::uint64_t size = 0;
  };

  TensorLog(std::filesystem::path dir, TensorLogOptions options);

  std::filesystem::path path_for(std::uint32_t file_id) const;
  std::shared_ptr<util::File> reader_for(std::uint32_t file_id) const;
  void open_active(std::uint32_t file_id);
  void roll_active();

  std::filesystem::path dir_;
  TensorLogOptions options_;

  mutable std::mutex mu_;  // guards files_, readers_, active bookkeeping
  std::map<std::uint32_t, FileInfo> files_;
  mutable std::map<std::uint32_t, std::shared_ptr<util::File>> readers_;
  std::unique_ptr<util::File> active_;
  std::uint32_t active_id_ = 0;
  std::uint32_t next_file_id_ = 0;

  struct Counters {
    std::atomic<std::uint64_t> append_batches{0};
    std::atomic<std::uint64_t> records_appended{0};
    std::atomic<std::uint64_t> bytes_appended{0};
    std::atomic<std::uint64_t> fsyncs{0};
    std::atomic<std::uint64_t> read_calls{0};
    std::atomic<std::uint64_t> records_read{0};
    std::atomic<std::uint64_t> bytes_read{0};
    std::atomic<std::uint64_t> merge_bytes_copied{0};
    std::atomic<std::uint64_t> merge_bytes_reclaimed{0};
    std::atomic<std::uint64_t> merge_records_dropped{0};
    std::atomic<std::uint64_t> files_created{0};
    std::atomic<std::uint64_t> files_deleted{0};
  };
  mutable Counters counters_;
};

}  // namespace kvlsm
