// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvlsm/tensor_log.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <optional>

#include "kvlsm/crc32c.hpp"
#include "kvlsm/error.hpp"
#include "util/file.hpp"

namespace kvlsm {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kMaxCoalescedRead = 64u << 20;
constexpr std::size_t kPrefixBytes = 6;  // magic + key_depth

std::string location_name(std::uint32_t file_id, std::uint64_t offset)
{
  return "(file_id=" + std::to_string(file_id) + ", offset=" + std::to_string(offset) + ")";
}

std::optional<std::uint32_t> parse_file_id(const std::string& name)
{
  // tlog-XXXXXXXX.dat
  if (name.size() != 17 || name.compare(0, 5, "tlog-") != 0 ||
      name.compare(13, 4, ".dat") != 0) {
    return std::nullopt;
  }
  std::uint32_t id = 0;
  for (std::size_t i = 5; i < 13; ++i) {
    char c = name[i];
    std::uint32_t digit;
    if (c >= '0' && c <= '9') {
      digit = static_cast<std::uint32_t>(c - '0');
    } else if (c >= 'a' && c <= 'f') {
      digit = static_cast<std::uint32_t>(c - 'a' + 10);
    } else {
      return std::nullopt;
    }
    id = (id << 4) | digit;
  }
  return id;
}

/// Parses the record at the start of `buf`. Returns the record and its size,
/// or an error string when framing or checksum fails.
struct ParseOutcome {
  std::optional<LogRecord> record;
  std::size_t size = 0;
  std::string error;
};

ParseOutcome parse_record(ByteView buf)
{
  ParseOutcome out;
  if (buf.size() < kPrefixBytes) {
    out.error = "truncated header";
    return out;
  }
  if (std::memcmp(buf.data(), kLogRecordMagic, 4) != 0) {
    out.error = "bad magic";
    return out;
  }
  const std::size_t depth = decode_fixed16(buf.data() + 4);
  const std::size_t key_bytes = depth * kDigestBytes;
  const std::size_t header = kLogRecordFixedBytes + key_bytes;
  if (depth == 0) {
    out.error = "zero key depth";
    return out;
  }
  if (buf.size() < header) {
    out.error = "truncated header";
    return out;
  }
  const std::uint8_t* p = buf.data() + kPrefixBytes + key_bytes;
  const std::uint8_t codec = p[0];
  const std::uint32_t raw_len = decode_fixed32(p + 1);
  const std::uint32_t stored_len = decode_fixed32(p + 5);
  const std::uint32_t crc = decode_fixed32(p + 9);
  if (buf.size() - header < stored_len) {
    out.error = "truncated payload";
    return out;
  }
  ByteView payload = buf.subspan(header, stored_len);
  if (crc32c(payload) != crc) {
    out.error = "payload checksum mismatch";
    return out;
  }
  if (codec > static_cast<std::uint8_t>(CodecId::kZlib)) {
    out.error = "unknown codec id " + std::to_string(codec);
    return out;
  }
  LogRecord rec;
  rec.key = PrefixKey::from_bytes(
      std::string(reinterpret_cast<const char*>(buf.data() + kPrefixBytes), key_bytes));
  rec.codec = static_cast<CodecId>(codec);
  rec.raw_len = raw_len;
  rec.payload_crc32c = crc;
  rec.payload.assign(payload.begin(), payload.end());
  out.record = std::move(rec);
  out.size = header + stored_len;
  return out;
}

}  // namespace

Bytes encode_log_record(const PrefixKey& key, ByteView stored, CodecId codec,
                        std::uint32_t raw_len)
{
  if (stored.empty()) {
    throw UsageError("tensor payload must be non-empty");
  }
  Bytes out;
  out.reserve(log_record_size(key.size(), stored.size()));
  out.insert(out.end(), kLogRecordMagic, kLogRecordMagic + 4);
  put_fixed16(out, key.depth());
  put_bytes(out, key.bytes());
  out.push_back(static_cast<std::uint8_t>(codec));
  put_fixed32(out, raw_len);
  put_fixed32(out, static_cast<std::uint32_t>(stored.size()));
  put_fixed32(out, crc32c(stored));
  put_bytes(out, stored);
  return out;
}

std::string tensor_log_file_name(std::uint32_t file_id)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "tlog-%08x.dat", file_id);
  return buf;
}

TensorLog::TensorLog(fs::path dir, TensorLogOptions options)
    : dir_(std::move(dir)), options_(options)
{
}

TensorLog::~TensorLog() = default;

fs::path TensorLog::path_for(std::uint32_t file_id) const
{
  return dir_ / tensor_log_file_name(file_id);
}

std::unique_ptr<TensorLog> TensorLog::open(const fs::path& dir, TensorLogOptions options)
{
  if (options.file_cap == 0) {
    throw UsageError("tensor log file_cap must be positive");
  }
  fs::create_directories(dir);
  std::unique_ptr<TensorLog> log(new TensorLog(dir, options));
  std::uint32_t max_id = 0;
  bool any = false;
  for (const auto& entry : fs::directory_iterator(dir)) {
    auto id = parse_file_id(entry.path().filename().string());
    if (!id || !entry.is_regular_file()) {
      continue;
    }
    log->files_[*id] = FileInfo{entry.file_size()};
    max_id = std::max(max_id, *id);
    any = true;
  }
  if (!any) {
    log->next_file_id_ = 1;
    log->open_active(log->next_file_id_++);
    return log;
  }
  log->next_file_id_ = max_id + 1;

  // Drop a torn tail on the newest file so appends resume at a record boundary.
  std::uint64_t intact_end = 0;
  log->scan_file(max_id, [&](const LogRecord&, const TensorLocation& loc) {
    intact_end = loc.offset + loc.length;
  });
  log->active_ = std::make_unique<util::File>(util::File::open_rw(log->path_for(max_id)));
  log->active_id_ = max_id;
  if (intact_end != log->files_[max_id].size) {
    log->active_->truncate(intact_end);
    log->active_->sync();
    log->files_[max_id].size = intact_end;
  }
  return log;
}

void TensorLog::open_active(std::uint32_t file_id)
{
  auto file = std::make_unique<util::File>(util::File::create(path_for(file_id)));
  util::sync_dir(dir_);
  std::lock_guard lock(mu_);
  files_[file_id] = FileInfo{0};
  active_ = std::move(file);
  active_id_ = file_id;
  counters_.files_created++;
}

void TensorLog::roll_active()
{
  open_active(next_file_id_++);
}

std::vector<TensorLocation> TensorLog::append_batch(std::span<const LogAppend> records)
{
  std::vector<TensorLocation> locations;
  if (records.empty()) {
    return locations;
  }
  locations.reserve(records.size());

  struct Segment {
    bool new_file = false;
    std::uint64_t start = 0;
    Bytes buf;
    std::size_t first_record = 0;
  };
  std::vector<Segment> segments;

  std::uint64_t size;
  {
    std::lock_guard lock(mu_);
    size = files_.at(active_id_).size;
  }
  segments.push_back(Segment{false, size, {}, 0});
  for (std::size_t i = 0; i < records.size(); ++i) {
    const LogAppend& rec = records[i];
    if (rec.key == nullptr) {
      throw UsageError("log append without a key");
    }
    Bytes encoded = encode_log_record(*rec.key, rec.stored, rec.codec, rec.raw_len);
    if (size > 0 && size + encoded.size() > options_.file_cap) {
      segments.push_back(Segment{true, 0, {}, i});
      size = 0;
    }
    locations.push_back(TensorLocation{0, size, static_cast<std::uint32_t>(encoded.size())});
    size += encoded.size();
    put_bytes(segments.back().buf, ByteView(encoded));
  }

  const std::uint32_t first_id = active_id_;
  const std::uint64_t first_start = segments.front().start;
  std::vector<std::uint32_t> created;
  try {
    for (std::size_t s = 0; s < segments.size(); ++s) {
      Segment& seg = segments[s];
      if (seg.buf.empty()) {
        continue;
      }
      if (seg.new_file) {
        active_->sync();
        counters_.fsyncs++;
        roll_active();
        created.push_back(active_id_);
      }
      const std::size_t end =
          s + 1 < segments.size() ? segments[s + 1].first_record : records.size();
      for (std::size_t i = seg.first_record; i < end; ++i) {
        locations[i].file_id = active_id_;
      }
      if (fault_fires(options_.fault, "tlog.append.torn")) {
        active_->pwrite_all(ByteView(seg.buf).first(seg.buf.size() / 2), seg.start);
        options_.fault->raise("tlog.append.torn");
      }
      active_->pwrite_all(seg.buf, seg.start);
      {
        std::lock_guard lock(mu_);
        files_[active_id_].size = seg.start + seg.buf.size();
      }
      fault_point(options_.fault, "tlog.append.before_sync");
      active_->sync();
      counters_.fsyncs++;
    }
  } catch (const Error&) {
    // Roll the log back to its pre-batch state; the caller sees no locations.
    for (std::uint32_t id : created) {
      std::error_code ec;
      fs::remove(path_for(id), ec);
      std::lock_guard lock(mu_);
      files_.erase(id);
      readers_.erase(id);
    }
    if (!created.empty()) {
      active_ = std::make_unique<util::File>(util::File::open_rw(path_for(first_id)));
      active_id_ = first_id;
    }
    try {
      active_->truncate(first_start);
    } catch (const Error&) {
    }
    std::lock_guard lock(mu_);
    files_[first_id].size = first_start;
    throw;
  }

  counters_.append_batches++;
  counters_.records_appended += records.size();
  for (const Segment& seg : segments) {
    counters_.bytes_appended += seg.buf.size();
  }
  return locations;
}

std::shared_ptr<util::File> TensorLog::reader_for(std::uint32_t file_id) const
{
  std::lock_guard lock(mu_);
  auto it = readers_.find(file_id);
  if (it != readers_.end()) {
    return it->second;
  }
  if (!files_.contains(file_id)) {
    throw StaleLocationError("tensor log file " + std::to_string(file_id) + " does not exist");
  }
  std::shared_ptr<util::File> file;
  try {
    file = std::make_shared<util::File>(util::File::open_read(path_for(file_id)));
  } catch (const IoError& e) {
    throw StaleLocationError(std::string("tensor log file unavailable: ") + e.what());
  }
  readers_[file_id] = file;
  return file;
}

std::vector<LogRecord> TensorLog::read_batch(std::span<const TensorLocation> locations) const
{
  std::vector<LogRecord> out(locations.size());
  if (locations.empty()) {
    return out;
  }
  std::vector<std::size_t> order(locations.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(locations[a].file_id, locations[a].offset) <
           std::tie(locations[b].file_id, locations[b].offset);
  });

  Bytes buf;
  std::size_t i = 0;
  while (i < order.size()) {
    const TensorLocation& first = locations[order[i]];
    std::size_t j = i + 1;
    std::uint64_t end = first.offset + first.length;
    while (j < order.size()) {
      const TensorLocation& next = locations[order[j]];
      if (next.file_id != first.file_id || next.offset != end ||
          end + next.length - first.offset > kMaxCoalescedRead) {
        break;
      }
      end += next.length;
      ++j;
    }

    auto file = reader_for(first.file_id);
    const std::size_t span_len = static_cast<std::size_t>(end - first.offset);
    buf.resize(span_len);
    const std::size_t got = file->pread_some(buf.data(), span_len, first.offset);
    counters_.read_calls++;
    counters_.bytes_read += got;

    std::size_t pos = 0;
    for (std::size_t k = i; k < j; ++k) {
      const TensorLocation& loc = locations[order[k]];
      if (pos + loc.length > got) {
        throw CorruptionError("tensor log record " + location_name(loc.file_id, loc.offset) +
                              ": past end of file");
      }
      ParseOutcome parsed = parse_record(ByteView(buf).subspan(pos, loc.length));
      if (!parsed.record) {
        throw CorruptionError("tensor log record " + location_name(loc.file_id, loc.offset) +
                              ": " + parsed.error);
      }
      if (parsed.size != loc.length) {
        throw CorruptionError("tensor log record " + location_name(loc.file_id, loc.offset) +
                              ": length mismatch");
      }
      out[order[k]] = std::move(*parsed.record);
      pos += loc.length;
    }
    counters_.records_read += j - i;
    i = j;
  }
  return out;
}

void TensorLog::scan_file(
    std::uint32_t file_id,
    const std::function<void(const LogRecord&, const TensorLocation&)>& fn) const
{
  util::File file = util::File::open_read(path_for(file_id));
  const std::uint64_t file_size = file.size();
  std::uint64_t offset = 0;
  Bytes buf;
  while (offset + kPrefixBytes <= file_size) {
    std::uint8_t prefix[kPrefixBytes];
    file.pread_exact(prefix, kPrefixBytes, offset);
    if (std::memcmp(prefix, kLogRecordMagic, 4) != 0) {
      return;
    }
    const std::size_t header = kLogRecordFixedBytes + decode_fixed16(prefix + 4) * kDigestBytes;
    if (offset + header > file_size) {
      return;
    }
    buf.resize(header);
    file.pread_exact(buf.data(), header, offset);
    const std::uint32_t stored_len = decode_fixed32(buf.data() + header - 8);
    if (offset + header + stored_len > file_size) {
      return;
    }
    buf.resize(header + stored_len);
    file.pread_exact(buf.data() + header, stored_len, offset + header);
    ParseOutcome parsed = parse_record(buf);
    if (!parsed.record) {
      return;
    }
    fn(*parsed.record,
       TensorLocation{file_id, offset, static_cast<std::uint32_t>(parsed.size)});
    offset += parsed.size;
  }
}

MergeResult TensorLog::merge_files(const LiveCheck& live, std::size_t max_files)
{
  MergeResult result;
  std::vector<std::uint32_t> closed;
  std::size_t total_files;
  {
    std::lock_guard lock(mu_);
    total_files = files_.size();
    for (const auto& [id, info] : files_) {
      if (id != active_id_) {
        closed.push_back(id);
      }
    }
  }
  if (total_files <= max_files) {
    return result;
  }

  struct Candidate {
    std::vector<std::uint32_t> files;
    std::uint64_t live_bytes = 0;
    std::uint64_t disk_bytes = 0;
    std::size_t records = 0;
    std::vector<TensorLocation> live_records;
  };
  // Plan on on-disk sizes: live bytes never exceed them, so a capped plan
  // stays under file_cap. Only files picked for merging are scanned below,
  // which keeps a tick's cost proportional to what it rewrites.
  std::vector<Candidate> groups;
  for (std::uint32_t id : closed) {
    Candidate c;
    c.files.push_back(id);
    std::lock_guard lock(mu_);
    c.disk_bytes = files_.at(id).size;
    groups.push_back(std::move(c));
  }

  // Coalesce the adjacent pair with the smallest combined size until the
  // target count is met. Outputs stay under file_cap when that suffices;
  // otherwise the count target wins and outputs grow past the cap.
  for (const bool capped : {true, false}) {
    while (1 + groups.size() > max_files && groups.size() >= 2) {
      std::optional<std::size_t> best;
      std::uint64_t best_bytes = 0;
      for (std::size_t i = 0; i + 1 < groups.size(); ++i) {
        std::uint64_t combined = groups[i].disk_bytes + groups[i + 1].disk_bytes;
        if ((!capped || combined <= options_.file_cap) && (!best || combined < best_bytes)) {
          best = i;
          best_bytes = combined;
        }
      }
      if (!best) {
        break;
      }
      Candidate& a = groups[*best];
      Candidate& b = groups[*best + 1];
      a.files.insert(a.files.end(), b.files.begin(), b.files.end());
      a.disk_bytes += b.disk_bytes;
      groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(*best) + 1);
    }
  }

  // Files with nothing live are retired without copying. A group left with a
  // single live file keeps it in place.
  std::size_t retired_records = 0;
  for (Candidate& g : groups) {
    if (g.files.size() == 1) {
      continue;
    }
    std::vector<std::uint32_t> live_files;
    std::uint64_t live_disk = 0;
    for (std::uint32_t id : g.files) {
      std::size_t records = 0;
      std::uint64_t live_bytes = 0;
      std::vector<TensorLocation> live_records;
      scan_file(id, [&](const LogRecord& rec, const TensorLocation& loc) {
        ++records;
        if (live(rec.key, loc)) {
          live_bytes += loc.length;
          live_records.push_back(loc);
        }
      });
      std::uint64_t size;
      {
        std::lock_guard lock(mu_);
        size = files_.at(id).size;
      }
      if (live_records.empty()) {
        result.retired.push_back(id);
        result.bytes_reclaimed += size;
        retired_records += records;
        continue;
      }
      live_files.push_back(id);
      live_disk += size;
      g.records += records;
      g.live_bytes += live_bytes;
      g.live_records.insert(g.live_records.end(), live_records.begin(), live_records.end());
    }
    g.files = std::move(live_files);
    g.disk_bytes = live_disk;
  }

  for (Candidate& g : groups) {
    if (g.files.size() <= 1) {
      continue;
    }
    retired_records += g.records;

    const std::uint32_t out_id = next_file_id_++;
    util::File out = util::File::create(path_for(out_id));
    util::sync_dir(dir_);
    counters_.files_created++;
    result.created.push_back(out_id);

    std::uint64_t out_size = 0;
    constexpr std::size_t kChunk = 256;
    for (std::size_t i = 0; i < g.live_records.size(); i += kChunk) {
      const std::size_t n = std::min(kChunk, g.live_records.size() - i);
      std::span<const TensorLocation> chunk(g.live_records.data() + i, n);
      std::vector<LogRecord> recs = read_batch(chunk);
      Bytes buf;
      for (std::size_t k = 0; k < n; ++k) {
        const LogRecord& rec = recs[k];
        Bytes encoded = encode_log_record(rec.key, rec.payload, rec.codec, rec.raw_len);
        result.remap.push_back(RemapEntry{
            rec.key, chunk[k],
            TensorLocation{out_id, out_size + buf.size(),
                           static_cast<std::uint32_t>(encoded.size())}});
        put_bytes(buf, ByteView(encoded));
      }
      if (fault_fires(options_.fault, "tlog.merge.torn")) {
        out.pwrite_all(ByteView(buf).first(buf.size() / 2), out_size);
        options_.fault->raise("tlog.merge.torn");
      }
      out.pwrite_all(buf, out_size);
      out_size += buf.size();
    }
    out.sync();
    counters_.fsyncs++;
    {
      std::lock_guard lock(mu_);
      files_[out_id] = FileInfo{out_size};
    }
    result.retired.insert(result.retired.end(), g.files.begin(), g.files.end());
    result.bytes_copied += out_size;
    result.bytes_reclaimed += g.disk_bytes - out_size;
    fault_point(options_.fault, "tlog.merge.after_output");
  }

  result.records_dropped = retired_records - result.remap.size();
  counters_.merge_bytes_copied += result.bytes_copied;
  counters_.merge_bytes_reclaimed += result.bytes_reclaimed;
  counters_.merge_records_dropped += result.records_dropped;
  return result;
}

void TensorLog::retire_files(std::span<const std::uint32_t> file_ids)
{
  for (std::uint32_t id : file_ids) {
    {
      std::lock_guard lock(mu_);
      if (id == active_id_) {
        throw UsageError("cannot retire the active tensor log file");
      }
      files_.erase(id);
      readers_.erase(id);
    }
    std::error_code ec;
    if (fs::remove(path_for(id), ec)) {
      counters_.files_deleted++;
    }
    fault_point(options_.fault, "tlog.retire.after_unlink");
  }
  if (!file_ids.empty()) {
    util::sync_dir(dir_);
  }
}

std::size_t TensorLog::file_count() const
{
  std::lock_guard lock(mu_);
  return files_.size();
}

std::vector<std::uint32_t> TensorLog::file_ids() const
{
  std::lock_guard lock(mu_);
  std::vector<std::uint32_t> ids;
  for (const auto& [id, info] : files_) {
    ids.push_back(id);
  }
  return ids;
}

std::uint64_t TensorLog::total_bytes() const
{
  std::lock_guard lock(mu_);
  std::uint64_t total = 0;
  for (const auto& [id, info] : files_) {
    total += info.size;
  }
  return total;
}

TensorLogStats TensorLog::stats() const
{
  TensorLogStats s;
  s.append_batches = counters_.append_batches.load();
  s.records_appended = counters_.records_appended.load();
  s.bytes_appended = counters_.bytes_appended.load();
  s.fsyncs = counters_.fsyncs.load();
  s.read_calls = counters_.read_calls.load();
  s.records_read = counters_.records_read.load();
  s.bytes_read = counters_.bytes_read.load();
  s.merge_bytes_copied = counters_.merge_bytes_copied.load();
  s.merge_bytes_reclaimed = counters_.merge_bytes_reclaimed.load();
  s.merge_records_dropped = counters_.merge_records_dropped.load();
  s.files_created = counters_.files_created.load();
  s.files_deleted = counters_.files_deleted.load();
  return s;
}

}  // namespace kvlsm
