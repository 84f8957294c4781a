// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvlsm/lsm_index.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "kvlsm/error.hpp"
#include "lsm/cursor.hpp"
#include "lsm/manifest.hpp"
#include "lsm/run.hpp"
#include "lsm/wal.hpp"
#include "util/file.hpp"

namespace kvlsm {

namespace fs = std::filesystem;

namespace lsm {

struct Version {
  std::vector<std::vector<std::shared_ptr<Run>>> levels;  // newest run first

  std::uint64_t level_bytes(std::size_t level) const
  {
    std::uint64_t total = 0;
    for (const auto& r : levels[level]) {
      total += r->info().logical_bytes;
    }
    return total;
  }
};

}  // namespace lsm

namespace {

constexpr const char* kWalName = "wal.log";
constexpr std::size_t kMaxCompactionPasses = 10000;

bool is_run_file(const std::string& name, std::uint64_t* id)
{
  if (name.size() < 9 || name.compare(0, 4, "run-") != 0 ||
      name.compare(name.size() - 4, 4, ".sst") != 0) {
    return false;
  }
  try {
    std::size_t used = 0;
    *id = std::stoull(name.substr(4, name.size() - 8), &used, 16);
    return used == name.size() - 8;
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

void encode_index_entry(Bytes& out, const IndexEntry& e)
{
  put_fixed32(out, e.file_id);
  put_fixed64(out, e.offset);
  put_fixed32(out, e.length);
  out.push_back(e.codec_id);
  put_fixed32(out, e.payload_crc32c);
}

void encode_index_entry(std::string& out, const IndexEntry& e)
{
  put_fixed32(out, e.file_id);
  put_fixed64(out, e.offset);
  put_fixed32(out, e.length);
  out.push_back(static_cast<char>(e.codec_id));
  put_fixed32(out, e.payload_crc32c);
}

IndexEntry decode_index_entry(ByteReader& in)
{
  IndexEntry e;
  e.file_id = in.u32();
  e.offset = in.u64();
  e.length = in.u32();
  e.codec_id = in.u8();
  e.payload_crc32c = in.u32();
  return e;
}

void LsmShape::validate() const
{
  if (size_ratio < 2) {
    throw UsageError("size ratio T must be >= 2 (got " + std::to_string(size_ratio) + ")");
  }
  if (runs_per_level < 1 || runs_per_level >= size_ratio) {
    throw UsageError("runs per level K must satisfy 1 <= K <= T-1 (T=" +
                     std::to_string(size_ratio) + ", K=" + std::to_string(runs_per_level) + ")");
  }
  if (buffer_bytes == 0) {
    throw UsageError("buffer size M must be positive");
  }
  if (bloom_bits_per_key == 0) {
    throw UsageError("bloom bits per key must be positive");
  }
}

double level_capacity(const LsmShape& shape, std::size_t level)
{
  return static_cast<double>(shape.buffer_bytes) *
         std::pow(static_cast<double>(shape.size_ratio), static_cast<double>(level + 1));
}

std::uint64_t LevelInfo::logical_bytes() const
{
  std::uint64_t total = 0;
  for (const RunInfo& r : runs) {
    total += r.logical_bytes;
  }
  return total;
}

const char* compaction_kind_name(CompactionAction::Kind kind) noexcept
{
  switch (kind) {
    case CompactionAction::Kind::kMerge:
      return "merge";
    case CompactionAction::Kind::kMove:
      return "move";
    case CompactionAction::Kind::kConsolidate:
      return "consolidate";
  }
  return "unknown";
}

struct LsmIndex::Counters {
  lsm::ReadCounters reads;
  lsm::ReadCounters compaction_reads;
  std::atomic<std::uint64_t> put_batches{0};
  std::atomic<std::uint64_t> entries_put{0};
  std::atomic<std::uint64_t> gets{0};
  std::atomic<std::uint64_t> memtable_hits{0};
  std::atomic<std::uint64_t> range_scans{0};
  std::atomic<std::uint64_t> flushes{0};
  std::atomic<std::uint64_t> bytes_flushed{0};
  std::atomic<std::uint64_t> compactions{0};
  std::atomic<std::uint64_t> runs_merged{0};
  std::atomic<std::uint64_t> runs_moved{0};
  std::atomic<std::uint64_t> bytes_rewritten{0};
  std::atomic<std::uint64_t> write_stalls{0};
  std::vector<std::uint64_t> committed_runs;  // guarded by write_mu_
};

LsmIndex::LsmIndex(fs::path dir, IndexOptions options)
    : dir_(std::move(dir)),
      options_(options),
      version_(std::make_shared<lsm::Version>()),
      counters_(std::make_unique<Counters>())
{
}

LsmIndex::~LsmIndex() = default;

std::unique_ptr<LsmIndex> LsmIndex::open(const fs::path& dir, IndexOptions options)
{
  options.shape.validate();
  fs::create_directories(dir);
  std::unique_ptr<LsmIndex> index(new LsmIndex(dir, options));
  index->recover();
  return index;
}

void LsmIndex::recover()
{
  std::lock_guard write(write_mu_);
  std::error_code ec;
  fs::remove(dir_ / lsm::kManifestTmpName, ec);
  fs::remove(dir_ / "MANIFEST.prev.tmp", ec);

  auto loaded = lsm::load_manifest(dir_);
  auto version = std::make_shared<lsm::Version>();
  std::set<std::uint64_t> keep;
  if (loaded) {
    const lsm::ManifestData& m = loaded->data;
    current_ = m.current;
    target_ = m.target;
    next_run_id_ = m.next_run_id;
    flushed_seq_ = m.flushed_seq;
    for (const auto& level : m.levels) {
      auto& runs = version->levels.emplace_back();
      for (const RunInfo& info : level) {
        runs.push_back(lsm::Run::open(dir_ / lsm::run_file_name(info.run_id), info));
      }
    }
    counters_->committed_runs = m.run_ids();
    keep.insert(counters_->committed_runs.begin(), counters_->committed_runs.end());
    if (loaded->previous) {
      prev_manifest_runs_ = loaded->previous->run_ids();
      keep.insert(prev_manifest_runs_.begin(), prev_manifest_runs_.end());
    }
  } else {
    current_ = target_ = options_.shape;
  }

  // Runs written by a flush or compaction that never reached the manifest.
  for (const auto& entry : fs::directory_iterator(dir_)) {
    std::uint64_t id = 0;
    if (is_run_file(entry.path().filename().string(), &id) && !keep.contains(id)) {
      fs::remove(entry.path(), ec);
      next_run_id_ = std::max(next_run_id_, id + 1);
    }
  }

  last_seq_ = flushed_seq_;
  wal_ = lsm::Wal::open(dir_ / kWalName, options_.fault, [&](lsm::WalBatch&& batch) {
    if (batch.seq <= flushed_seq_) {
      return;
    }
    for (auto& [key, entry] : batch.pairs) {
      auto [it, inserted] = memtable_.insert_or_assign(key.bytes(), entry);
      if (inserted) {
        memtable_bytes_ += logical_pair_bytes(key.size());
      }
    }
    last_seq_ = std::max(last_seq_, batch.seq);
  });
  version_ = std::move(version);

  if (!loaded) {
    commit_manifest_locked(*version_);
  }
}

void LsmIndex::install_version(std::shared_ptr<const lsm::Version> version)
{
  std::unique_lock lock(state_mu_);
  version_ = std::move(version);
}

void LsmIndex::commit_manifest_locked(const lsm::Version& version)
{
  lsm::ManifestData m;
  m.current = current_;
  m.target = target_;
  m.next_run_id = next_run_id_;
  m.flushed_seq = flushed_seq_;
  for (const auto& level : version.levels) {
    auto& infos = m.levels.emplace_back();
    for (const auto& run : level) {
      infos.push_back(run->info());
    }
  }
  while (!m.levels.empty() && m.levels.back().empty()) {
    m.levels.pop_back();
  }
  lsm::commit_manifest(dir_, m, options_.fault);
  prev_manifest_runs_ = std::move(counters_->committed_runs);
  counters_->committed_runs = m.run_ids();
}

void LsmIndex::delete_obsolete_runs_locked()
{
  std::set<std::uint64_t> keep(counters_->committed_runs.begin(),
                               counters_->committed_runs.end());
  keep.insert(prev_manifest_runs_.begin(), prev_manifest_runs_.end());
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir_)) {
    std::uint64_t id = 0;
    if (is_run_file(entry.path().filename().string(), &id) && !keep.contains(id)) {
      fs::remove(entry.path(), ec);
    }
  }
}

std::shared_ptr<const lsm::Version> LsmIndex::snapshot() const
{
  std::shared_lock lock(state_mu_);
  return version_;
}

void LsmIndex::put_batch(std::span<const IndexPair> pairs)
{
  if (pairs.empty()) {
    return;
  }
  for (const auto& [key, entry] : pairs) {
    if (key.size() == 0 || key.size() % kDigestBytes != 0) {
      throw UsageError("malformed prefix key of " + std::to_string(key.size()) + " bytes");
    }
  }

  std::lock_guard write(write_mu_);
  const std::uint64_t seq = last_seq_ + 1;
  wal_->append(seq, pairs);
  fault_point(options_.fault, "lsm.put.after_wal");
  {
    std::unique_lock lock(state_mu_);
    for (const auto& [key, entry] : pairs) {
      auto [it, inserted] = memtable_.insert_or_assign(key.bytes(), entry);
      if (inserted) {
        memtable_bytes_ += logical_pair_bytes(key.size());
      }
    }
  }
  last_seq_ = seq;
  counters_->put_batches++;
  counters_->entries_put += pairs.size();

  if (memtable_bytes_ >= target_.buffer_bytes) {
    flush_locked();
  }
  // Level 0 may hold up to 2K runs before writers wait on compaction.
  while (version_->levels.size() > 0 &&
         version_->levels[0].size() > 2 * static_cast<std::size_t>(target_.runs_per_level)) {
    counters_->write_stalls++;
    if (compact_pass_locked().empty()) {
      break;
    }
  }
}

std::optional<std::uint64_t> LsmIndex::flush()
{
  std::lock_guard write(write_mu_);
  return flush_locked();
}

std::optional<std::uint64_t> LsmIndex::flush_locked()
{
  if (memtable_.empty()) {
    return std::nullopt;
  }
  const std::uint64_t run_id = next_run_id_++;
  const fs::path path = dir_ / lsm::run_file_name(run_id);
  RunInfo info;
  try {
    lsm::RunBuilder builder(path, target_.bloom_bits_per_key);
    for (const auto& [key, entry] : memtable_) {
      builder.add(key, entry);
    }
    info = builder.finish(run_id);
    util::sync_dir(dir_);
  } catch (const Error&) {
    std::error_code ec;
    fs::remove(path, ec);
    throw;
  }
  fault_point(options_.fault, "lsm.flush.after_run_write");

  auto run = lsm::Run::open(path, info);
  auto next = std::make_shared<lsm::Version>(*version_);
  if (next->levels.empty()) {
    next->levels.emplace_back();
  }
  next->levels[0].insert(next->levels[0].begin(), run);

  const std::uint64_t prev_flushed = flushed_seq_;
  flushed_seq_ = last_seq_;
  try {
    commit_manifest_locked(*next);
  } catch (const Error&) {
    flushed_seq_ = prev_flushed;
    throw;
  }
  fault_point(options_.fault, "lsm.flush.after_manifest");

  {
    std::unique_lock lock(state_mu_);
    version_ = std::move(next);
    memtable_.clear();
    memtable_bytes_ = 0;
  }
  wal_->reset();
  counters_->flushes++;
  counters_->bytes_flushed += info.file_bytes;
  delete_obsolete_runs_locked();
  return run_id;
}

std::shared_ptr<lsm::Run> LsmIndex::merge_runs_locked(
    const std::vector<std::shared_ptr<lsm::Run>>& inputs_newest_first)
{
  std::vector<std::unique_ptr<lsm::Cursor>> cursors;
  for (const auto& run : inputs_newest_first) {
    cursors.push_back(run->cursor("", counters_->compaction_reads));
  }
  lsm::MergingCursor merged(std::move(cursors));

  const std::uint64_t run_id = next_run_id_++;
  const fs::path path = dir_ / lsm::run_file_name(run_id);
  RunInfo info;
  try {
    lsm::RunBuilder builder(path, target_.bloom_bits_per_key);
    for (; merged.valid(); merged.next()) {
      builder.add(merged.key(), merged.entry());
    }
    info = builder.finish(run_id);
  } catch (const Error&) {
    std::error_code ec;
    fs::remove(path, ec);
    throw;
  }
  fault_point(options_.fault, "lsm.compact.after_output_write");
  return lsm::Run::open(path, info);
}

CompactionReport LsmIndex::compact_pass_locked()
{
  CompactionReport report;
  const std::size_t k = target_.runs_per_level;
  const bool k_shrinking = current_.runs_per_level > target_.runs_per_level;
  auto next = std::make_shared<lsm::Version>(*version_);
  auto& levels = next->levels;

  auto ids_of = [](const std::vector<std::shared_ptr<lsm::Run>>& runs) {
    std::vector<std::uint64_t> ids;
    for (const auto& r : runs) {
      ids.push_back(r->id());
    }
    return ids;
  };

  for (std::size_t i = 0; i < levels.size(); ++i) {
    auto& runs = levels[i];
    if (runs.empty()) {
      continue;
    }
    const bool over_count = runs.size() > k;
    const bool over_capacity =
        static_cast<double>(next->level_bytes(i)) > level_capacity(target_, i);
    if (!over_count && !over_capacity) {
      continue;
    }

    CompactionAction action;
    action.from_level = i;
    action.input_runs = ids_of(runs);

    if (over_count && !over_capacity && k_shrinking) {
      // A pending K decrease consolidates the level's runs where they are.
      auto out = merge_runs_locked(runs);
      action.kind = CompactionAction::Kind::kConsolidate;
      action.to_level = i;
      action.output_run = out->id();
      action.bytes_rewritten = out->info().file_bytes;
      report.runs_merged += runs.size();
      runs = {out};
      report.bytes_rewritten += action.bytes_rewritten;
      report.actions.push_back(std::move(action));
      continue;
    }

    if (i + 1 == levels.size()) {
      levels.emplace_back();
    }
    auto& src = levels[i];
    auto& dest = levels[i + 1];
    action.to_level = i + 1;
    if (k == 1 && !dest.empty()) {
      // Leveling: the destination must stay a single run.
      std::vector<std::shared_ptr<lsm::Run>> inputs = src;
      inputs.insert(inputs.end(), dest.begin(), dest.end());
      auto out = merge_runs_locked(inputs);
      action.kind = CompactionAction::Kind::kMerge;
      action.input_runs = ids_of(inputs);
      action.output_run = out->id();
      action.bytes_rewritten = out->info().file_bytes;
      report.runs_merged += inputs.size();
      dest = {out};
    } else if (src.size() == 1) {
      // A lone run moves down untouched.
      action.kind = CompactionAction::Kind::kMove;
      dest.insert(dest.begin(), src.front());
    } else {
      auto out = merge_runs_locked(src);
      action.kind = CompactionAction::Kind::kMerge;
      action.output_run = out->id();
      action.bytes_rewritten = out->info().file_bytes;
      report.runs_merged += src.size();
      dest.insert(dest.begin(), out);
    }
    src.clear();
    report.bytes_rewritten += action.bytes_rewritten;
    report.actions.push_back(std::move(action));
  }

  if (report.empty()) {
    if (!(current_ == target_)) {
      const LsmShape prev = current_;
      current_ = target_;
      try {
        commit_manifest_locked(*version_);
      } catch (const Error&) {
        current_ = prev;
        throw;
      }
      report.shape_converged = true;
    }
    return report;
  }

  while (!levels.empty() && levels.back().empty()) {
    levels.pop_back();
  }
  commit_manifest_locked(*next);
  fault_point(options_.fault, "lsm.compact.after_manifest");
  install_version(std::move(next));
  counters_->compactions++;
  counters_->runs_merged += report.runs_merged;
  counters_->bytes_rewritten += report.bytes_rewritten;
  for (const auto& a : report.actions) {
    if (a.kind == CompactionAction::Kind::kMove) {
      counters_->runs_moved++;
    }
  }
  delete_obsolete_runs_locked();
  return report;
}

CompactionReport LsmIndex::maybe_compact()
{
  std::lock_guard write(write_mu_);
  return compact_pass_locked();
}

CompactionReport LsmIndex::compact_to_fixpoint()
{
  std::lock_guard write(write_mu_);
  CompactionReport total;
  for (std::size_t pass = 0; pass < kMaxCompactionPasses; ++pass) {
    CompactionReport r = compact_pass_locked();
    total.shape_converged = total.shape_converged || r.shape_converged;
    if (r.empty()) {
      if (current_ == target_) {
        return total;
      }
      continue;
    }
    total.runs_merged += r.runs_merged;
    total.bytes_rewritten += r.bytes_rewritten;
    std::move(r.actions.begin(), r.actions.end(), std::back_inserter(total.actions));
  }
  throw Error(ErrorCode::kUsage, "compaction did not reach a fixpoint");
}

void LsmIndex::set_target_shape(const LsmShape& shape)
{
  shape.validate();
  std::lock_guard write(write_mu_);
  if (shape == target_) {
    return;
  }
  const LsmShape prev = target_;
  target_ = shape;
  try {
    commit_manifest_locked(*version_);
  } catch (const Error&) {
    target_ = prev;
    throw;
  }
}

LsmShape LsmIndex::current_shape() const
{
  std::lock_guard write(write_mu_);
  return current_;
}

LsmShape LsmIndex::target_shape() const
{
  std::lock_guard write(write_mu_);
  return target_;
}

std::optional<IndexEntry> LsmIndex::get(const PrefixKey& key) const
{
  counters_->gets++;
  std::shared_ptr<const lsm::Version> version;
  {
    std::shared_lock lock(state_mu_);
    auto it = memtable_.find(key.bytes());
    if (it != memtable_.end()) {
      counters_->memtable_hits++;
      return it->second;
    }
    version = version_;
  }
  for (const auto& level : version->levels) {
    for (const auto& run : level) {
      if (auto e = run->get(key.bytes(), counters_->reads)) {
        return e;
      }
    }
  }
  return std::nullopt;
}

std::vector<IndexPair> LsmIndex::range_scan(std::string_view start, std::string_view end) const
{
  if (!(start < end)) {
    throw UsageError("range scan requires start < end");
  }
  return scan(start, end);
}

std::vector<IndexPair> LsmIndex::scan_from(std::string_view start) const
{
  return scan(start, std::nullopt);
}

std::vector<IndexPair> LsmIndex::scan(std::string_view start,
                                      std::optional<std::string_view> end) const
{
  counters_->range_scans++;
  auto before_end = [&](std::string_view k) { return !end || k < *end; };
  std::vector<std::pair<std::string, IndexEntry>> mem;
  std::shared_ptr<const lsm::Version> version;
  {
    std::shared_lock lock(state_mu_);
    for (auto it = memtable_.lower_bound(start); it != memtable_.end() && before_end(it->first);
         ++it) {
      mem.emplace_back(it->first, it->second);
    }
    version = version_;
  }
  std::vector<std::unique_ptr<lsm::Cursor>> cursors;
  cursors.push_back(std::make_unique<lsm::VectorCursor>(std::move(mem)));
  for (const auto& level : version->levels) {
    for (const auto& run : level) {
      if (std::string_view(run->info().max_key) < start || !before_end(run->info().min_key)) {
        continue;
      }
      cursors.push_back(run->cursor(start, counters_->reads));
    }
  }
  lsm::MergingCursor merged(std::move(cursors));
  std::vector<IndexPair> out;
  for (; merged.valid() && before_end(merged.key()); merged.next()) {
    out.emplace_back(PrefixKey::from_bytes(std::string(merged.key())), merged.entry());
  }
  return out;
}

std::vector<LevelInfo> LsmIndex::levels() const
{
  auto version = snapshot();
  std::vector<LevelInfo> out;
  for (std::size_t i = 0; i < version->levels.size(); ++i) {
    LevelInfo li;
    li.level = i;
    for (const auto& run : version->levels[i]) {
      li.runs.push_back(run->info());
    }
    out.push_back(std::move(li));
  }
  while (!out.empty() && out.back().runs.empty()) {
    out.pop_back();
  }
  return out;
}

std::size_t LsmIndex::memtable_entries() const
{
  std::shared_lock lock(state_mu_);
  return memtable_.size();
}

std::uint64_t LsmIndex::memtable_bytes() const
{
  std::shared_lock lock(state_mu_);
  return memtable_bytes_;
}

std::uint64_t LsmIndex::entry_count_estimate() const
{
  std::shared_lock lock(state_mu_);
  std::uint64_t n = memtable_.size();
  for (const auto& level : version_->levels) {
    for (const auto& run : level) {
      n += run->info().entry_count;
    }
  }
  return n;
}

double LsmIndex::average_pair_bytes() const
{
  std::shared_lock lock(state_mu_);
  std::uint64_t n = memtable_.size();
  std::uint64_t bytes = memtable_bytes_;
  for (const auto& level : version_->levels) {
    for (const auto& run : level) {
      n += run->info().entry_count;
      bytes += run->info().logical_bytes;
    }
  }
  return n == 0 ? 0.0 : static_cast<double>(bytes) / static_cast<double>(n);
}

std::size_t LsmIndex::file_count() const
{
  std::size_t n = 0;
  std::uint64_t id = 0;
  for (const auto& entry : fs::directory_iterator(dir_)) {
    const std::string name = entry.path().filename().string();
    if (is_run_file(name, &id) || name == kWalName || name == lsm::kManifestName ||
        name == lsm::kManifestPrevName) {
      ++n;
    }
  }
  return n;
}

IndexStats LsmIndex::stats() const
{
  IndexStats s;
  s.put_batches = counters_->put_batches.load();
  s.entries_put = counters_->entries_put.load();
  s.gets = counters_->gets.load();
  s.memtable_hits = counters_->memtable_hits.load();
  s.bloom_probes = counters_->reads.bloom_probes.load();
  s.bloom_negatives = counters_->reads.bloom_negatives.load();
  s.data_block_reads = counters_->reads.data_block_reads.load();
  s.range_scans = counters_->range_scans.load();
  s.flushes = counters_->flushes.load();
  s.bytes_flushed = counters_->bytes_flushed.load();
  s.compactions = counters_->compactions.load();
  s.runs_merged = counters_->runs_merged.load();
  s.runs_moved = counters_->runs_moved.load();
  s.bytes_rewritten = counters_->bytes_rewritten.load();
  s.write_stalls = counters_->write_stalls.load();
  {
    std::lock_guard write(write_mu_);
    s.wal_bytes = wal_->bytes_written();
    s.wal_syncs = wal_->syncs();
  }
  return s;
}

}  // namespace kvlsm
