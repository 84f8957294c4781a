// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kvlsm/bytes.hpp"
#include "kvlsm/fault.hpp"
#include "kvlsm/keycodec.hpp"
#include "kvlsm/tensor_log.hpp"

namespace kvlsm {

/// Index value: where the tensor payload for a key lives in the tensor log.
struct IndexEntry {
  std::uint32_t file_id = 0;
  std::uint64_t offset = 0;
  std::uint32_t length = 0;
  std::uint8_t codec_id = 0;
  std::uint32_t payload_crc32c = 0;

  TensorLocation location() const noexcept { return {file_id, offset, length}; }

  friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

inline constexpr std::size_t kIndexEntryBytes = 4 + 8 + 4 + 1 + 4;

void encode_index_entry(Bytes& out, const IndexEntry& e);
void encode_index_entry(std::string& out, const IndexEntry& e);
IndexEntry decode_index_entry(ByteReader& in);

/// Logical size of one (key, entry) pair, the unit used for buffer and level
/// capacity accounting.
inline std::uint64_t logical_pair_bytes(std::size_t key_bytes)
{
  return key_bytes + kIndexEntryBytes;
}

/// Structural parameters of the tree. `runs_per_level` == 1 is leveling,
/// `size_ratio` - 1 is tiering.
struct LsmShape {
  std::uint32_t size_ratio = 4;
  std::uint32_t runs_per_level = 1;
  std::uint64_t buffer_bytes = 1u << 20;
  std::uint32_t bloom_bits_per_key = 10;

  /// Throws UsageError unless T >= 2, 1 <= K <= T-1, M > 0 and bits > 0.
  void validate() const;

  friend bool operator==(const LsmShape&, const LsmShape&) = default;
};

/// Capacity in logical bytes of level `level` (0 = flush target):
/// M * T^(level + 1).
double level_capacity(const LsmShape& shape, std::size_t level);

inline constexpr std::size_t kDataBlockBytes = 4096;

struct IndexOptions {
  LsmShape shape;
  FaultInjector* fault = nullptr;
};

struct RunInfo {
  std::uint64_t run_id = 0;
  std::uint64_t entry_count = 0;
  std::uint64_t logical_bytes = 0;
  std::uint64_t file_bytes = 0;
  std::string min_key;
  std::string max_key;
};

struct LevelInfo {
  std::size_t level = 0;
  std::vector<RunInfo> runs;  // newest first

  std::uint64_t logical_bytes() const;
};

struct CompactionAction {
  enum class Kind { kMerge, kMove, kConsolidate };

  Kind kind = Kind::kMerge;
  std::size_t from_level = 0;
  std::size_t to_level = 0;
  std::vector<std::uint64_t> input_runs;
  std::optional<std::uint64_t> output_run;
  std::uint64_t bytes_rewritten = 0;
};

const char* compaction_kind_name(CompactionAction::Kind kind) noexcept;

struct CompactionReport {
  std::vector<CompactionAction> actions;
  std::uint64_t runs_merged = 0;
  std::uint64_t bytes_rewritten = 0;
  bool shape_converged = false;  // current shape caught up with the target

  bool empty() const noexcept { return actions.empty(); }
};

struct IndexStats {
  std::uint64_t put_batches = 0;
  std::uint64_t entries_put = 0;
  std::uint64_t wal_bytes = 0;
  std::uint64_t wal_syncs = 0;
  std::uint64_t gets = 0;
  std::uint64_t memtable_hits = 0;
  std::uint64_t bloom_probes = 0;
  std::uint64_t bloom_negatives = 0;
  std::uint64_t data_block_reads = 0;
  std::uint64_t range_scans = 0;
  std::uint64_t flushes = 0;
  std::uint64_t bytes_flushed = 0;
  std::uint64_t compactions = 0;
  std::uint64_t runs_merged = 0;
  std::uint64_t runs_moved = 0;
  std::uint64_t bytes_rewritten = 0;
  std::uint64_t write_stalls = 0;
};

using IndexPair = std::pair<PrefixKey, IndexEntry>;

namespace lsm {
class Run;
class Wal;
struct Version;
}  // namespace lsm

/// Durable ordered map from PrefixKey to IndexEntry: memtable + WAL in front
/// of levels of immutable sorted runs with bloom filters and fence indexes.
///
/// One writer at a time (put/flush/compaction/set_target_shape are serialized
/// internally). Readers work on an immutable snapshot of the run set and never
/// block behind compaction I/O.
class LsmIndex {
 public:
  /// Recovers the index in `dir` (created if missing): loads the newest
  /// manifest that passes its checksum, falls back to the previous one,
  /// deletes unreferenced run files and replays the WAL. The shape in
  /// `options` is used only when the directory has no manifest yet.
  static std::unique_ptr<LsmIndex> open(const std::filesystem::path& dir,
                                        IndexOptions options);
  ~LsmIndex();

  LsmIndex(const LsmIndex&) = delete;
  LsmIndex& operator=(const LsmIndex&) = delete;

  /// Appends the batch to the WAL with one fsync, then applies it to the
  /// memtable. Flushes when the memtable reaches M bytes and stalls on
  /// compaction while level 0 holds more than 2K runs.
  void put_batch(std::span<const IndexPair> pairs);

  std::optional<IndexEntry> get(const PrefixKey& key) const;

  /// Merged, key-ordered entries with keys in [start, end); newer versions
  /// shadow older ones. Requires start < end.
  std::vector<IndexPair> range_scan(std::string_view start, std::string_view end) const;

  /// Every live entry with key >= start.
  std::vector<IndexPair> scan_from(std::string_view start) const;

  /// Writes the memtable as a new level-0 run. Returns the run id, or nothing
  /// when the memtable was empty.
  std::optional<std::uint64_t> flush();

  /// One compaction cycle over all levels (top-down) under the target shape.
  CompactionReport maybe_compact();

  /// Runs maybe_compact() until it reports no work.
  CompactionReport compact_to_fixpoint();

  /// Records the target shape. Nothing is restructured here: subsequent
  /// flushes and compactions apply it.
  void set_target_shape(const LsmShape& shape);

  LsmShape current_shape() const;
  LsmShape target_shape() const;

  std::vector<LevelInfo> levels() const;
  std::size_t memtable_entries() const;
  std::uint64_t memtable_bytes() const;
  /// Entry count over memtable and runs (shadowed duplicates included).
  std::uint64_t entry_count_estimate() const;
  /// Mean logical bytes per (key, entry) pair across the runs and memtable.
  double average_pair_bytes() const;
  std::size_t file_count() const;

  IndexStats stats() const;

 private:
  struct Counters;

  LsmIndex(std::filesystem::path dir, IndexOptions options);

  void recover();
  void commit_manifest_locked(const lsm::Version& version);
  void install_version(std::shared_ptr<const lsm::Version> version);
  void delete_obsolete_runs_locked();
  std::optional<std::uint64_t> flush_locked();
  CompactionReport compact_pass_locked();
  std::shared_ptr<lsm::Run> merge_runs_locked(
      const std::vector<std::shared_ptr<lsm::Run>>& inputs_newest_first);
  std::shared_ptr<const lsm::Version> snapshot() const;
  std::vector<IndexPair> scan(std::string_view start, std::optional<std::string_view> end) const;

  std::filesystem::path dir_;
  IndexOptions options_;

  mutable std::mutex write_mu_;         // single writer
  mutable std::shared_mutex state_mu_;  // memtable_ and version_

  std::map<std::string, IndexEntry, std::less<>> memtable_;
  std::uint64_t memtable_bytes_ = 0;
  std::shared_ptr<const lsm::Version> version_;

  LsmShape current_;
  LsmShape target_;
  std::uint64_t next_run_id_ = 1;
  std::uint64_t last_seq_ = 0;          // last WAL batch applied
  std::uint64_t flushed_seq_ = 0;       // last WAL batch contained in runs
  std::vector<std::uint64_t> prev_manifest_runs_;
  std::unique_ptr<lsm::Wal> wal_;

  std::unique_ptr<Counters> counters_;
};

}  // namespace kvlsm
