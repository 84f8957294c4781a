// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>

#include "kvlsm/backend.hpp"
#include "kvlsm/codec.hpp"

namespace kvlsm {

struct FpoOptions {
  std::size_t block_tokens = 64;
  CodecId codec = CodecId::kZlib;
  int zlib_level = 1;
};

/// File name holding the block whose chain key is `key`:
/// 16 lowercase hex digits of FNV-1a-64 over the key bytes, then ".kv".
std::string fpo_file_name(const PrefixKey& key);

/// One file per stored block in a flat directory. Same contract as Engine;
/// only the storage layout (and therefore the resource profile) differs.
class FpoBackend final : public CacheBackend {
 public:
  static std::unique_ptr<FpoBackend> open(const std::filesystem::path& dir, FpoOptions options);

  std::size_t put_batch(TokenSpan tokens, std::span<const ByteView> tensors) override;
  ProbeResult probe(TokenSpan tokens) override;
  std::vector<Bytes> get_batch(TokenSpan tokens, std::size_t upto_blocks) override;
  bool maintain() override { return false; }

  OpStats snapshot_stats() const override;
  OpStats reset_window();
  OpStats total_stats() const override { return totals_.load(); }

  std::size_t file_count() const override;
  std::uint64_t disk_bytes() const override;
  std::string name() const override { return "fpo"; }
  std::size_t block_tokens() const override { return options_.block_tokens; }

  /// open/read/write/close/stat calls issued so far.
  std::uint64_t syscalls() const noexcept { return syscalls_.load(); }

 private:
  FpoBackend(std::filesystem::path dir, FpoOptions options);

  bool exists(const PrefixKey& key) const;

  std::filesystem::path dir_;
  FpoOptions options_;
  std::mutex write_mu_;
  AtomicOpStats totals_;
  mutable std::mutex window_mu_;
  OpStats window_base_;
  mutable std::atomic<std::uint64_t> syscalls_{0};
};

}  // namespace kvlsm
