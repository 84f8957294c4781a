// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsm/manifest.hpp"

#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "kvlsm/crc32c.hpp"
#include "kvlsm/error.hpp"
#include "util/file.hpp"

namespace kvlsm::lsm {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'K', 'V', 'M', 'F'};
constexpr std::uint32_t kVersion = 1;

void put_shape(Bytes& out, const LsmShape& s)
{
  put_fixed32(out, s.size_ratio);
  put_fixed32(out, s.runs_per_level);
  put_fixed64(out, s.buffer_bytes);
  put_fixed32(out, s.bloom_bits_per_key);
}

LsmShape get_shape(ByteReader& in)
{
  LsmShape s;
  s.size_ratio = in.u32();
  s.runs_per_level = in.u32();
  s.buffer_bytes = in.u64();
  s.bloom_bits_per_key = in.u32();
  return s;
}

void put_string(Bytes& out, const std::string& s)
{
  put_fixed32(out, static_cast<std::uint32_t>(s.size()));
  put_bytes(out, s);
}

}  // namespace

Bytes ManifestData::encode() const
{
  Bytes payload;
  put_shape(payload, current);
  put_shape(payload, target);
  put_fixed64(payload, next_run_id);
  put_fixed64(payload, flushed_seq);
  put_fixed32(payload, static_cast<std::uint32_t>(levels.size()));
  for (const auto& level : levels) {
    put_fixed32(payload, static_cast<std::uint32_t>(level.size()));
    for (const RunInfo& r : level) {
      put_fixed64(payload, r.run_id);
      put_fixed64(payload, r.entry_count);
      put_fixed64(payload, r.logical_bytes);
      put_fixed64(payload, r.file_bytes);
      put_string(payload, r.min_key);
      put_string(payload, r.max_key);
    }
  }
  Bytes out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_fixed32(out, kVersion);
  put_fixed32(out, static_cast<std::uint32_t>(payload.size()));
  put_bytes(out, ByteView(payload));
  put_fixed32(out, crc32c(ByteView(payload)));
  return out;
}

ManifestData ManifestData::decode(ByteView data)
{
  ByteReader head(data, "manifest");
  ByteView magic = head.take(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw CorruptionError("manifest: bad magic");
  }
  if (head.u32() != kVersion) {
    throw CorruptionError("manifest: unsupported version");
  }
  const std::uint32_t len = head.u32();
  ByteView payload = head.take(len);
  if (crc32c(payload) != head.u32()) {
    throw CorruptionError("manifest: checksum mismatch");
  }
  ByteReader in(payload, "manifest payload");
  ManifestData m;
  m.current = get_shape(in);
  m.target = get_shape(in);
  m.next_run_id = in.u64();
  m.flushed_seq = in.u64();
  m.levels.resize(in.u32());
  for (auto& level : m.levels) {
    level.resize(in.u32());
    for (RunInfo& r : level) {
      r.run_id = in.u64();
      r.entry_count = in.u64();
      r.logical_bytes = in.u64();
      r.file_bytes = in.u64();
      r.min_key = in.take_string(in.u32());
      r.max_key = in.take_string(in.u32());
    }
  }
  return m;
}

std::vector<std::uint64_t> ManifestData::run_ids() const
{
  std::vector<std::uint64_t> ids;
  for (const auto& level : levels) {
    for (const RunInfo& r : level) {
      ids.push_back(r.run_id);
    }
  }
  return ids;
}

void commit_manifest(const fs::path& dir, const ManifestData& data, FaultInjector* fault)
{
  const fs::path current = dir / kManifestName;
  const fs::path prev = dir / kManifestPrevName;
  const fs::path tmp = dir / kManifestTmpName;

  if (fs::exists(current)) {
    // Hard-link the live manifest under a temporary name and rename it over
    // MANIFEST.prev, so MANIFEST itself is never absent.
    const fs::path prev_tmp = dir / "MANIFEST.prev.tmp";
    std::error_code ec;
    fs::remove(prev_tmp, ec);
    if (::link(current.c_str(), prev_tmp.c_str()) != 0) {
      throw IoError("link " + current.string() + ": " + std::strerror(errno));
    }
    fs::rename(prev_tmp, prev);
  }
  util::write_file_synced(tmp, data.encode());
  fault_point(fault, "manifest.after_tmp_write");
  fs::rename(tmp, current);
  util::sync_dir(dir);
}

std::optional<LoadedManifest> load_manifest(const fs::path& dir)
{
  const fs::path current = dir / kManifestName;
  const fs::path prev = dir / kManifestPrevName;
  const bool have_current = fs::exists(current);
  const bool have_prev = fs::exists(prev);
  if (!have_current && !have_prev) {
    return std::nullopt;
  }

  auto try_load = [](const fs::path& p) -> std::optional<ManifestData> {
    try {
      return ManifestData::decode(util::read_file(p));
    } catch (const CorruptionError&) {
      return std::nullopt;
    }
  };

  std::optional<ManifestData> cur = have_current ? try_load(current) : std::nullopt;
  std::optional<ManifestData> old = have_prev ? try_load(prev) : std::nullopt;
  if (cur) {
    return LoadedManifest{std::move(*cur), false, std::move(old)};
  }
  if (old) {
    return LoadedManifest{std::move(*old), true, std::nullopt};
  }
  throw UnrecoverableError("manifest checksum failed on both " + current.string() + " and " +
                           prev.string());
}

}  // namespace kvlsm::lsm
