// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsm/run.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>

#include "kvlsm/crc32c.hpp"
#include "kvlsm/error.hpp"

namespace kvlsm::lsm {

namespace fs = std::filesystem;

Bytes RunFooter::encode() const
{
  Bytes out;
  out.reserve(kSize);
  out.insert(out.end(), kRunMagic, kRunMagic + 8);
  put_fixed32(out, kRunFormatVersion);
  put_fixed64(out, entry_count);
  put_fixed32(out, block_count);
  put_fixed64(out, fence_offset);
  put_fixed32(out, fence_length);
  put_fixed64(out, bloom_offset);
  put_fixed32(out, bloom_length);
  put_fixed32(out, meta_crc32c);
  put_fixed32(out, crc32c(ByteView(out)));
  return out;
}

RunFooter RunFooter::decode(ByteView data, std::string_view what)
{
  if (data.size() != kSize) {
    throw CorruptionError(std::string(what) + ": footer has wrong size");
  }
  if (crc32c(data.first(kSize - 4)) != decode_fixed32(data.data() + kSize - 4)) {
    throw CorruptionError(std::string(what) + ": footer checksum mismatch");
  }
  ByteReader in(data, what);
  ByteView magic = in.take(8);
  if (std::memcmp(magic.data(), kRunMagic, 8) != 0) {
    throw CorruptionError(std::string(what) + ": bad run magic");
  }
  const std::uint32_t version = in.u32();
  if (version != kRunFormatVersion) {
    throw CorruptionError(std::string(what) + ": unsupported run format version " +
                          std::to_string(version));
  }
  RunFooter f;
  f.entry_count = in.u64();
  f.block_count = in.u32();
  f.fence_offset = in.u64();
  f.fence_length = in.u32();
  f.bloom_offset = in.u64();
  f.bloom_length = in.u32();
  f.meta_crc32c = in.u32();
  return f;
}

std::string run_file_name(std::uint64_t run_id)
{
  char buf[40];
  std::snprintf(buf, sizeof(buf), "run-%08llx.sst", static_cast<unsigned long long>(run_id));
  return buf;
}

// ---------------------------------------------------------------------------

RunBuilder::RunBuilder(const fs::path& path, std::uint32_t bloom_bits_per_key)
    : path_(path), bloom_bits_(bloom_bits_per_key), file_(util::File::create(path))
{
}

void RunBuilder::add(std::string_view key, const IndexEntry& entry)
{
  if (entry_count_ > 0 && key <= std::string_view(last_key_)) {
    throw UsageError("run keys must be strictly increasing");
  }
  const std::size_t entry_bytes = 4 + key.size() + kIndexEntryBytes;
  // 4 bytes of count header and 4 bytes of crc trailer per block.
  if (block_entries_ > 0 && 4 + block_.size() + entry_bytes + 4 > kDataBlockBytes) {
    flush_block();
  }
  if (block_entries_ == 0) {
    block_first_key_.assign(key);
  }
  put_fixed32(block_, static_cast<std::uint32_t>(key.size()));
  put_bytes(block_, key);
  encode_index_entry(block_, entry);
  ++block_entries_;

  if (entry_count_ == 0) {
    min_key_.assign(key);
  }
  last_key_.assign(key);
  hashes_.push_back(bloom_hash(key));
  ++entry_count_;
  logical_bytes_ += logical_pair_bytes(key.size());
}

void RunBuilder::flush_block()
{
  if (block_entries_ == 0) {
    return;
  }
  Bytes out;
  out.reserve(block_.size() + 8);
  put_fixed32(out, block_entries_);
  put_bytes(out, ByteView(block_));
  put_fixed32(out, crc32c(ByteView(out)));
  file_.pwrite_all(out, offset_);
  fences_.push_back(Fence{offset_, static_cast<std::uint32_t>(out.size()), block_first_key_});
  offset_ += out.size();
  block_.clear();
  block_entries_ = 0;
}

RunInfo RunBuilder::finish(std::uint64_t run_id)
{
  if (entry_count_ == 0) {
    throw UsageError("cannot finish an empty run");
  }
  flush_block();

  Bytes meta;
  put_fixed32(meta, static_cast<std::uint32_t>(fences_.size()));
  for (const Fence& f : fences_) {
    put_fixed64(meta, f.offset);
    put_fixed32(meta, f.length);
    put_fixed32(meta, static_cast<std::uint32_t>(f.first_key.size()));
    put_bytes(meta, f.first_key);
  }
  put_fixed32(meta, static_cast<std::uint32_t>(last_key_.size()));
  put_bytes(meta, last_key_);
  const std::size_t fence_length = meta.size();
  BloomFilter::build(hashes_, bloom_bits_).encode(meta);

  RunFooter footer;
  footer.entry_count = entry_count_;
  footer.block_count = static_cast<std::uint32_t>(fences_.size());
  footer.fence_offset = offset_;
  footer.fence_length = static_cast<std::uint32_t>(fence_length);
  footer.bloom_offset = offset_ + fence_length;
  footer.bloom_length = static_cast<std::uint32_t>(meta.size() - fence_length);
  footer.meta_crc32c = crc32c(ByteView(meta));
  put_bytes(meta, ByteView(footer.encode()));
  file_.pwrite_all(meta, offset_);
  offset_ += meta.size();
  file_.sync();

  RunInfo info;
  info.run_id = run_id;
  info.entry_count = entry_count_;
  info.logical_bytes = logical_bytes_;
  info.file_bytes = offset_;
  info.min_key = min_key_;
  info.max_key = last_key_;
  return info;
}

// ---------------------------------------------------------------------------

namespace {

class RunCursor final : public Cursor {
 public:
  RunCursor(std::shared_ptr<const Run> run, std::string_view start, ReadCounters& counters)
      : run_(std::move(run)), counters_(counters)
  {
    std::size_t b = run_->find_block(start);
    block_index_ = b == run_->block_count() ? 0 : b;
    load();
    while (valid() && key() < start) {
      next();
    }
  }

  bool valid() const override { return pos_ < block_.size(); }
  std::string_view key() const override { return block_[pos_].first; }
  const IndexEntry& entry() const override { return block_[pos_].second; }

  void next() override
  {
    if (++pos_ < block_.size()) {
      return;
    }
    ++block_index_;
    load();
  }

 private:
  void load()
  {
    pos_ = 0;
    block_.clear();
    while (block_index_ < run_->block_count()) {
      block_ = run_->read_block(block_index_, counters_);
      if (!block_.empty()) {
        return;
      }
      ++block_index_;
    }
  }

  std::shared_ptr<const Run> run_;
  ReadCounters& counters_;
  std::size_t block_index_ = 0;
  Run::Block block_;
  std::size_t pos_ = 0;
};

}  // namespace

std::shared_ptr<Run> Run::open(const fs::path& path, const RunInfo& info)
{
  const std::string what = "run " + path.filename().string();
  util::File file = util::File::open_read(path);
  const std::uint64_t size = file.size();
  if (size < RunFooter::kSize) {
    throw CorruptionError(what + ": file too small");
  }
  Bytes footer_bytes(RunFooter::kSize);
  file.pread_exact(footer_bytes.data(), footer_bytes.size(), size - RunFooter::kSize);
  const RunFooter footer = RunFooter::decode(footer_bytes, what);
  if (footer.bloom_offset + footer.bloom_length + RunFooter::kSize != size ||
      footer.fence_offset + footer.fence_length != footer.bloom_offset) {
    throw CorruptionError(what + ": footer offsets inconsistent with file size");
  }
  Bytes meta(footer.fence_length + footer.bloom_length);
  file.pread_exact(meta.data(), meta.size(), footer.fence_offset);
  if (crc32c(ByteView(meta)) != footer.meta_crc32c) {
    throw CorruptionError(what + ": fence/bloom checksum mismatch");
  }

  std::shared_ptr<Run> run(new Run(std::move(file), info));
  ByteReader in(ByteView(meta).first(footer.fence_length), what);
  const std::uint32_t blocks = in.u32();
  if (blocks != footer.block_count) {
    throw CorruptionError(what + ": block count mismatch");
  }
  run->fences_.reserve(blocks);
  for (std::uint32_t i = 0; i < blocks; ++i) {
    Fence f;
    f.offset = in.u64();
    f.length = in.u32();
    f.first_key = in.take_string(in.u32());
    run->fences_.push_back(std::move(f));
  }
  std::string last_key = in.take_string(in.u32());
  run->bloom_ = BloomFilter::decode(ByteView(meta).subspan(footer.fence_length));

  run->info_.entry_count = footer.entry_count;
  run->info_.file_bytes = size;
  if (!run->fences_.empty()) {
    run->info_.min_key = run->fences_.front().first_key;
  }
  run->info_.max_key = std::move(last_key);
  if (info.entry_count != 0 && info.entry_count != footer.entry_count) {
    throw CorruptionError(what + ": entry count disagrees with manifest");
  }
  return run;
}

std::size_t Run::find_block(std::string_view key) const
{
  auto it = std::upper_bound(fences_.begin(), fences_.end(), key,
                             [](std::string_view k, const Fence& f) { return k < f.first_key; });
  if (it == fences_.begin()) {
    return fences_.size();
  }
  return static_cast<std::size_t>(it - fences_.begin()) - 1;
}

Run::Block Run::read_block(std::size_t index, ReadCounters& counters) const
{
  const Fence& f = fences_.at(index);
  Bytes buf(f.length);
  file_.pread_exact(buf.data(), buf.size(), f.offset);
  counters.data_block_reads++;
  const std::string what = "run " + std::to_string(info_.run_id) + " block " + std::to_string(index);
  if (buf.size() < 8 ||
      crc32c(ByteView(buf).first(buf.size() - 4)) != decode_fixed32(buf.data() + buf.size() - 4)) {
    throw CorruptionError(what + ": checksum mismatch");
  }
  ByteReader in(ByteView(buf).first(buf.size() - 4), what);
  const std::uint32_t n = in.u32();
  Block block;
  block.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string key = in.take_string(in.u32());
    IndexEntry e = decode_index_entry(in);
    block.emplace_back(std::move(key), e);
  }
  return block;
}

std::optional<IndexEntry> Run::get(std::string_view key, ReadCounters& counters) const
{
  if (fences_.empty() || key < std::string_view(info_.min_key) ||
      key > std::string_view(info_.max_key)) {
    return std::nullopt;
  }
  counters.bloom_probes++;
  if (!bloom_.may_contain(key)) {
    counters.bloom_negatives++;
    return std::nullopt;
  }
  const std::size_t b = find_block(key);
  if (b == fences_.size()) {
    return std::nullopt;
  }
  Block block = read_block(b, counters);
  auto it = std::lower_bound(block.begin(), block.end(), key,
                             [](const auto& p, std::string_view k) { return p.first < k; });
  if (it == block.end() || it->first != key) {
    return std::nullopt;
  }
  return it->second;
}

std::unique_ptr<Cursor> Run::cursor(std::string_view start, ReadCounters& counters) const
{
  return std::make_unique<RunCursor>(shared_from_this(), start, counters);
}

}  // namespace kvlsm::lsm
