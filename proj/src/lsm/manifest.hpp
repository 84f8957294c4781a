// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "kvlsm/fault.hpp"
#include "kvlsm/lsm_index.hpp"

namespace kvlsm::lsm {

inline constexpr const char* kManifestName = "MANIFEST";
inline constexpr const char* kManifestPrevName = "MANIFEST.prev";
inline constexpr const char* kManifestTmpName = "MANIFEST.tmp";

// Manifest file: ['K' 'V' 'M' 'F'][version u32][payload_len u32][payload][crc32c(payload) u32]
struct ManifestData {
  LsmShape current;
  LsmShape target;
  std::uint64_t next_run_id = 1;
  std::uint64_t flushed_seq = 0;
  std::vector<std::vector<RunInfo>> levels;  // newest run first within a level

  Bytes encode() const;
  static ManifestData decode(ByteView data);

  std::vector<std::uint64_t> run_ids() const;
};

/// Writes `data` as the new manifest. The previous manifest survives as
/// MANIFEST.prev; the swap itself is a rename, so a crash leaves either the
/// old or the new version in place.
void commit_manifest(const std::filesystem::path& dir, const ManifestData& data,
                     FaultInjector* fault);

struct LoadedManifest {
  ManifestData data;
  bool from_previous = false;
  std::optional<ManifestData> previous;  // the fallback, when loadable
};

/// Returns nothing when no manifest exists. Throws UnrecoverableError when
/// manifests exist but none passes its checksum.
std::optional<LoadedManifest> load_manifest(const std::filesystem::path& dir);

}  // namespace kvlsm::lsm
