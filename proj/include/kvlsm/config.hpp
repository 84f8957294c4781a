// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "kvlsm/codec.hpp"
#include "kvlsm/lsm_index.hpp"

namespace kvlsm {

struct EngineConfig {
  std::size_t block_tokens = 64;
  LsmShape shape;  // used only when the index directory is new
  std::uint64_t file_cap = 256ull << 20;
  std::size_t merge_threshold = 64;
  CodecId codec = CodecId::kZlib;
  int zlib_level = 1;
  bool controller_enabled = true;
  std::uint64_t window_min = 1000;
  double retune_threshold = 0.2;
  std::uint32_t t_max = 16;

  void validate() const;

  /// `key = value` lines, one per field; '#' starts a comment. Unknown keys
  /// and malformed values raise UsageError. Missing keys keep defaults.
  static EngineConfig parse(std::string_view text);
  static EngineConfig load(const std::filesystem::path& path);
  std::string to_string() const;
  void save(const std::filesystem::path& path) const;
};

}  // namespace kvlsm
