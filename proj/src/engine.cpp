// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvlsm/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iterator>

#include "kvlsm/crc32c.hpp"
#include "kvlsm/error.hpp"

namespace kvlsm {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t elapsed_ns(Clock::time_point start)
{
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count());
}

std::pair<std::size_t, std::uint64_t> dir_usage(const fs::path& dir)
{
  std::size_t files = 0;
  std::uint64_t bytes = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      ++files;
      bytes += e.file_size();
    }
  }
  return {files, bytes};
}

}  // namespace

Engine::Engine(fs::path dir, EngineConfig config, FaultInjector* fault)
    : dir_(std::move(dir)), config_(std::move(config)), fault_(fault)
{
}

Engine::~Engine() = default;

std::unique_ptr<Engine> Engine::open(const fs::path& dir, const EngineConfig& config,
                                     FaultInjector* fault)
{
  config.validate();
  fs::create_directories(dir);
  const fs::path conf_path = dir / kEngineConfigName;
  if (fs::exists(conf_path)) {
    const EngineConfig stored = EngineConfig::load(conf_path);
    if (stored.block_tokens != config.block_tokens) {
      throw UsageError("engine at " + dir.string() + " uses block_tokens=" +
                       std::to_string(stored.block_tokens) + ", not " +
                       std::to_string(config.block_tokens));
    }
  }
  config.save(conf_path);

  std::unique_ptr<Engine> engine(new Engine(dir, config, fault));
  engine->index_ = LsmIndex::open(dir / "index", IndexOptions{config.shape, fault});
  engine->log_ = TensorLog::open(dir / "tlog", TensorLogOptions{config.file_cap, fault});
  if (config.controller_enabled) {
    ControllerOptions co;
    co.window_min = config.window_min;
    co.threshold = config.retune_threshold;
    co.t_max = config.t_max;
    co.decision_log = dir / kDecisionLogName;
    engine->controller_ = std::make_unique<Controller>(co);
  }
  engine->window_base_ = engine->totals_now();
  return engine;
}

std::unique_ptr<Engine> Engine::open_existing(const fs::path& dir, FaultInjector* fault)
{
  const fs::path conf_path = dir / kEngineConfigName;
  if (!fs::exists(conf_path)) {
    throw UsageError("no engine at " + dir.string() + " (missing " + kEngineConfigName + ")");
  }
  return open(dir, EngineConfig::load(conf_path), fault);
}

std::size_t Engine::stored_prefix(const std::vector<PrefixKey>& keys) const
{
  std::size_t lo = 0;
  std::size_t hi = keys.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi + 1) / 2;
    if (index_->get(keys[mid - 1])) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return lo;
}

std::size_t Engine::put_batch(TokenSpan tokens, std::span<const ByteView> tensors)
{
  const auto start = Clock::now();
  const std::vector<PrefixKey> keys = chain_keys(tokens, config_.block_tokens);
  if (tensors.size() != keys.size()) {
    throw UsageError("put_batch: " + std::to_string(tensors.size()) + " tensors for " +
                     std::to_string(keys.size()) + " full blocks");
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].empty()) {
      throw UsageError("put_batch: tensor for block " + std::to_string(i) + " is empty");
    }
  }
  if (keys.empty()) {
    return 0;
  }

  std::lock_guard write(write_mu_);
  // Every stored chain has all its prefixes, so existing blocks form a prefix.
  const std::size_t existing = stored_prefix(keys);
  const std::size_t fresh = keys.size() - existing;
  if (fresh == 0) {
    OpStats delta;
    delta.put_calls = 1;
    delta.put_ns = elapsed_ns(start);
    totals_.add(delta);
    return 0;
  }

  std::vector<EncodedBatch> encoded;
  encoded.reserve(fresh);
  std::vector<LogAppend> appends;
  appends.reserve(fresh);
  for (std::size_t i = existing; i < keys.size(); ++i) {
    const ByteView one[] = {tensors[i]};
    encoded.push_back(encode_batch(one, config_.codec, config_.zlib_level));
    appends.push_back(LogAppend{&keys[i], encoded.back().bytes, config_.codec,
                                encoded.back().raw_len});
  }

  fault_point(fault_, "engine.put.before_log_append");
  const std::vector<TensorLocation> locs = log_->append_batch(appends);
  fault_point(fault_, "engine.put.between_phases");

  std::vector<IndexPair> pairs;
  pairs.reserve(fresh);
  std::uint64_t bytes = 0;
  for (std::size_t j = 0; j < fresh; ++j) {
    IndexEntry e;
    e.file_id = locs[j].file_id;
    e.offset = locs[j].offset;
    e.length = locs[j].length;
    e.codec_id = static_cast<std::uint8_t>(config_.codec);
    e.payload_crc32c = crc32c(ByteView(encoded[j].bytes));
    pairs.emplace_back(keys[existing + j], e);
    bytes += locs[j].length;
  }
  index_->put_batch(pairs);
  fault_point(fault_, "engine.put.after_index");

  OpStats delta;
  delta.writes = fresh;
  delta.put_calls = 1;
  delta.bytes_written = bytes;
  delta.put_ns = elapsed_ns(start);
  totals_.add(delta);
  return fresh;
}

ProbeResult Engine::probe(TokenSpan tokens)
{
  const auto start = Clock::now();
  const std::vector<PrefixKey> keys = chain_keys(tokens, config_.block_tokens);
  std::size_t lo = 0;
  std::size_t hi = keys.size();
  std::uint64_t lookups = 0;
  std::uint64_t present = 0;
  while (lo < hi) {
    const std::size_t mid = (lo + hi + 1) / 2;
    ++lookups;
    if (index_->get(keys[mid - 1])) {
      ++present;
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  OpStats delta;
  delta.probe_calls = 1;
  delta.point_lookups = lookups;
  if (lo == 0) {
    delta.zero_result_probes = 1;
  } else {
    delta.succeeded_point_reads = present;
  }
  delta.probe_ns = elapsed_ns(start);
  totals_.add(delta);
  return ProbeResult{lo, lo * config_.block_tokens};
}

std::vector<Bytes> Engine::get_batch(TokenSpan tokens, std::size_t upto_blocks)
{
  if (upto_blocks == 0) {
    return {};
  }
  const auto start = Clock::now();
  const std::vector<PrefixKey> keys = chain_keys(tokens, config_.block_tokens);
  if (upto_blocks > keys.size()) {
    throw UsageError("get_batch: " + std::to_string(upto_blocks) + " blocks requested but tokens " +
                     "hold only " + std::to_string(keys.size()));
  }

  std::shared_lock gate(read_gate_);
  const std::string end = keys[upto_blocks - 1].bytes() + '\0';
  const std::vector<IndexPair> scanned = index_->range_scan(keys[0].bytes(), end);

  // Chain keys ascend with depth, so one pass over the sorted scan picks them
  // out; anything else in the range belongs to another chain.
  std::vector<IndexEntry> entries;
  entries.reserve(upto_blocks);
  std::size_t next = 0;
  for (const auto& [key, entry] : scanned) {
    if (next < upto_blocks && key == keys[next]) {
      entries.push_back(entry);
      ++next;
    }
  }
  if (next != upto_blocks) {
    throw UsageError("get_batch: block " + std::to_string(next + 1) + " of " +
                     std::to_string(upto_blocks) + " is not stored");
  }

  std::vector<TensorLocation> locs;
  locs.reserve(entries.size());
  for (const IndexEntry& e : entries) {
    locs.push_back(e.location());
  }
  std::vector<LogRecord> records = log_->read_batch(locs);
  gate.unlock();

  std::vector<Bytes> out;
  out.reserve(upto_blocks);
  std::uint64_t bytes = 0;
  for (std::size_t i = 0; i < upto_blocks; ++i) {
    const LogRecord& rec = records[i];
    const IndexEntry& e = entries[i];
    if (rec.key != keys[i] || rec.payload_crc32c != e.payload_crc32c ||
        static_cast<std::uint8_t>(rec.codec) != e.codec_id) {
      throw CorruptionError("tensor record at file " + std::to_string(e.file_id) + " offset " +
                            std::to_string(e.offset) + " does not match its index entry");
    }
    std::vector<Bytes> items = decode_batch(rec.payload, rec.codec);
    if (items.size() != 1) {
      throw CorruptionError("tensor record at file " + std::to_string(e.file_id) + " offset " +
                            std::to_string(e.offset) + " holds " + std::to_string(items.size()) +
                            " payloads");
    }
    bytes += items[0].size();
    out.push_back(std::move(items[0]));
  }

  OpStats delta;
  delta.get_calls = 1;
  delta.range_scans = 1;
  delta.range_scan_entries = scanned.size();
  delta.blocks_read = upto_blocks;
  delta.bytes_read = bytes;
  delta.get_ns = elapsed_ns(start);
  totals_.add(delta);
  return out;
}

CostModelParams Engine::cost_params(const OpStats& window) const
{
  const LsmShape target = index_->target_shape();
  CostModelParams p;
  p.n = std::max<double>(1, static_cast<double>(index_->entry_count_estimate()));
  const double e = index_->average_pair_bytes();
  p.e = e > 0 ? e : static_cast<double>(logical_pair_bytes(kDigestBytes));
  p.m = static_cast<double>(target.buffer_bytes);
  p.b = std::max(1.0, std::floor(static_cast<double>(kDataBlockBytes) / p.e));
  p.bloom_bits = target.bloom_bits_per_key;
  p.d_bar = window.range_scans > 0 ? static_cast<double>(window.range_scan_entries) /
                                         static_cast<double>(window.range_scans)
                                   : 1.0;
  if (p.d_bar <= 0) {
    p.d_bar = 1.0;
  }
  return p;
}

MaintenanceReport Engine::maintenance_tick()
{
  std::lock_guard single(maintenance_mu_);
  const auto start = Clock::now();
  MaintenanceReport report;
  {
    std::lock_guard write(write_mu_);
    report = maintenance_locked();
  }

  if (controller_) {
    const OpStats window = snapshot_stats();
    ControllerDecision d = controller_->tick(window, cost_params(window));
    if (d.choice) {
      LsmShape target = index_->target_shape();
      target.size_ratio = d.choice->size_ratio;
      target.runs_per_level = d.choice->runs_per_level;
      std::lock_guard write(write_mu_);
      index_->set_target_shape(target);
    }
    if (d.evaluated()) {
      reset_window();
    }
    report.decision = std::move(d);
  }

  OpStats delta;
  delta.maintenance_ns = elapsed_ns(start);
  totals_.add(delta);
  return report;
}

MaintenanceReport Engine::maintenance_locked()
{
  MaintenanceReport report;
  auto log_written = [this] {
    const TensorLogStats s = log_->stats();
    return s.bytes_appended + s.merge_bytes_copied;
  };

  const std::uint64_t before = log_written();
  report.compaction = index_->maybe_compact();
  report.tensor_bytes_during_index_compaction = log_written() - before;
  tensor_bytes_during_index_compaction_ += report.tensor_bytes_during_index_compaction;

  report.log_files_before = log_->file_count();
  if (report.log_files_before > config_.merge_threshold) {
    auto live = [this](const PrefixKey& key, const TensorLocation& loc) {
      auto e = index_->get(key);
      return e && e->location() == loc;
    };
    MergeResult merged = log_->merge_files(live, config_.merge_threshold);
    if (!merged.empty()) {
      std::vector<IndexPair> pairs;
      pairs.reserve(merged.remap.size());
      for (const RemapEntry& r : merged.remap) {
        auto e = index_->get(r.key);
        if (!e || e->location() != r.from) {
          throw CorruptionError("merge remap for a key whose entry moved concurrently");
        }
        e->file_id = r.to.file_id;
        e->offset = r.to.offset;
        e->length = r.to.length;
        pairs.emplace_back(r.key, *e);
      }
      // The index must point at the new copies before the old files go.
      index_->put_batch(pairs);
      fault_point(fault_, "engine.merge.after_index_update");
      {
        std::unique_lock gate(read_gate_);
        log_->retire_files(merged.retired);
      }
      fault_point(fault_, "engine.merge.after_retire");
      report.merged = true;
      report.remapped = merged.remap.size();
      report.records_dropped = merged.records_dropped;
      report.bytes_copied = merged.bytes_copied;
      report.bytes_reclaimed = merged.bytes_reclaimed;
    }
  }
  report.log_files_after = log_->file_count();
  return report;
}

MaintenanceReport Engine::compact_to_fixpoint()
{
  std::lock_guard single(maintenance_mu_);
  std::lock_guard write(write_mu_);
  MaintenanceReport total;
  for (int pass = 0; pass < 10000; ++pass) {
    MaintenanceReport r = maintenance_locked();
    if (pass == 0) {
      total.log_files_before = r.log_files_before;
    }
    total.log_files_after = r.log_files_after;
    total.tensor_bytes_during_index_compaction += r.tensor_bytes_during_index_compaction;
    total.compaction.runs_merged += r.compaction.runs_merged;
    total.compaction.bytes_rewritten += r.compaction.bytes_rewritten;
    total.compaction.shape_converged |= r.compaction.shape_converged;
    std::move(r.compaction.actions.begin(), r.compaction.actions.end(),
              std::back_inserter(total.compaction.actions));
    total.merged |= r.merged;
    total.remapped += r.remapped;
    total.records_dropped += r.records_dropped;
    total.bytes_copied += r.bytes_copied;
    total.bytes_reclaimed += r.bytes_reclaimed;
    if (r.compaction.empty() && !r.merged &&
        index_->current_shape() == index_->target_shape()) {
      return total;
    }
  }
  throw Error(ErrorCode::kUsage, "maintenance did not reach a fixpoint");
}

OpStats Engine::totals_now() const
{
  OpStats s = totals_.load();
  s.data_block_reads = index_->stats().data_block_reads;
  return s;
}

OpStats Engine::snapshot_stats() const
{
  std::lock_guard lock(window_mu_);
  return totals_now() - window_base_;
}

OpStats Engine::reset_window()
{
  std::lock_guard lock(window_mu_);
  const OpStats now = totals_now();
  const OpStats window = now - window_base_;
  window_base_ = now;
  return window;
}

OpStats Engine::total_stats() const
{
  return totals_now();
}

IntegrityReport Engine::verify() const
{
  IntegrityReport report;
  const std::vector<IndexPair> all = index_->scan_from("");
  report.entries = all.size();
  auto note = [&](const std::string& msg) {
    ++report.dangling;
    if (report.problems.size() < 8) {
      report.problems.push_back(msg);
    }
  };
  auto check_one = [&](const IndexPair& pair, const LogRecord& rec) {
    const IndexEntry& e = pair.second;
    if (rec.key != pair.first || rec.payload_crc32c != e.payload_crc32c ||
        static_cast<std::uint8_t>(rec.codec) != e.codec_id) {
      note("entry at file " + std::to_string(e.file_id) + " offset " + std::to_string(e.offset) +
           " points at a different record");
      return;
    }
    try {
      if (decode_batch(rec.payload, rec.codec).size() != 1) {
        note("record at file " + std::to_string(e.file_id) + " has a bad payload frame");
      }
    } catch (const Error& err) {
      note(err.what());
    }
  };

  std::shared_lock gate(read_gate_);
  constexpr std::size_t kChunk = 256;
  for (std::size_t i = 0; i < all.size(); i += kChunk) {
    const std::size_t n = std::min(kChunk, all.size() - i);
    std::vector<TensorLocation> locs;
    for (std::size_t k = 0; k < n; ++k) {
      locs.push_back(all[i + k].second.location());
    }
    try {
      auto recs = log_->read_batch(locs);
      for (std::size_t k = 0; k < n; ++k) {
        check_one(all[i + k], recs[k]);
      }
    } catch (const Error&) {
      // Retry one by one to pin down the bad entries.
      for (std::size_t k = 0; k < n; ++k) {
        try {
          auto recs = log_->read_batch(std::span(&locs[k], 1));
          check_one(all[i + k], recs[0]);
        } catch (const Error& err) {
          note(err.what());
        }
      }
    }
  }
  return report;
}

std::size_t Engine::file_count() const
{
  return dir_usage(dir_).first;
}

std::uint64_t Engine::disk_bytes() const
{
  return dir_usage(dir_).second;
}

}  // namespace kvlsm
