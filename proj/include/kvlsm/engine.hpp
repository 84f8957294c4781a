// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "kvlsm/backend.hpp"
#include "kvlsm/config.hpp"
#include "kvlsm/controller.hpp"
#include "kvlsm/fault.hpp"
#include "kvlsm/lsm_index.hpp"
#include "kvlsm/tensor_log.hpp"

namespace kvlsm {

struct MaintenanceReport {
  CompactionReport compaction;
  bool merged = false;
  std::size_t log_files_before = 0;
  std::size_t log_files_after = 0;
  std::size_t remapped = 0;
  std::uint64_t records_dropped = 0;
  std::uint64_t bytes_copied = 0;
  std::uint64_t bytes_reclaimed = 0;
  /// Tensor-log bytes written while the index compacted; always 0.
  std::uint64_t tensor_bytes_during_index_compaction = 0;
  std::optional<ControllerDecision> decision;

  bool empty() const noexcept
  {
    return compaction.empty() && !merged &&
           !(decision && decision->action == ControllerDecision::Action::kRetune);
  }
};

struct IntegrityReport {
  std::uint64_t entries = 0;
  std::uint64_t dangling = 0;
  std::vector<std::string> problems;  // first few, for messages

  bool ok() const noexcept { return dangling == 0; }
};

/// Disk-resident KV-cache store: prefix-keyed LSM index over an append-only
/// tensor log.
///
/// put_batch calls serialize with each other and with maintenance; probe and
/// get_batch may run concurrently with both.
class Engine final : public CacheBackend {
 public:
  /// Opens `dir`, creating it if needed. The config is persisted as
  /// `engine.conf`; reopening with a different block size is rejected.
  static std::unique_ptr<Engine> open(const std::filesystem::path& dir, const EngineConfig& config,
                                      FaultInjector* fault = nullptr);
  /// Reopens `dir` with the config it was created with.
  static std::unique_ptr<Engine> open_existing(const std::filesystem::path& dir,
                                               FaultInjector* fault = nullptr);
  ~Engine() override;

  std::size_t put_batch(TokenSpan tokens, std::span<const ByteView> tensors) override;
  ProbeResult probe(TokenSpan tokens) override;
  std::vector<Bytes> get_batch(TokenSpan tokens, std::size_t upto_blocks) override;
  bool maintain() override { return !maintenance_tick().empty(); }

  /// Index compaction, tensor-file merging when over the threshold, then one
  /// controller tick. Single-flight.
  MaintenanceReport maintenance_tick();

  /// Runs maintenance until index compaction and file merging have nothing
  /// left to do.
  MaintenanceReport compact_to_fixpoint();

  OpStats snapshot_stats() const override;
  /// Returns the closed window and starts a new one.
  OpStats reset_window();
  OpStats total_stats() const override;

  /// Reads every index entry back from the tensor log.
  IntegrityReport verify() const;

  std::size_t file_count() const override;
  std::uint64_t disk_bytes() const override;
  std::string name() const override { return "lsm"; }
  std::size_t block_tokens() const override { return config_.block_tokens; }

  const EngineConfig& config() const noexcept { return config_; }
  const std::filesystem::path& dir() const noexcept { return dir_; }
  LsmIndex& index() noexcept { return *index_; }
  const LsmIndex& index() const noexcept { return *index_; }
  TensorLog& log() noexcept { return *log_; }
  const TensorLog& log() const noexcept { return *log_; }
  const Controller* controller() const noexcept { return controller_.get(); }
  std::uint64_t tensor_bytes_during_index_compaction() const noexcept
  {
    return tensor_bytes_during_index_compaction_.load();
  }
  CostModelParams cost_params(const OpStats& window) const;

 private:
  Engine(std::filesystem::path dir, EngineConfig config, FaultInjector* fault);

  std::size_t stored_prefix(const std::vector<PrefixKey>& keys) const;
  OpStats totals_now() const;
  MaintenanceReport maintenance_locked();

  std::filesystem::path dir_;
  EngineConfig config_;
  FaultInjector* fault_;
  std::unique_ptr<LsmIndex> index_;
  std::unique_ptr<TensorLog> log_;
  std::unique_ptr<Controller> controller_;

  std::mutex write_mu_;
  std::mutex maintenance_mu_;
  // Held shared by get_batch, exclusively while tensor files are deleted.
  mutable std::shared_mutex read_gate_;

  AtomicOpStats totals_;
  mutable std::mutex window_mu_;
  OpStats window_base_;
  std::atomic<std::uint64_t> tensor_bytes_during_index_compaction_{0};
};

inline constexpr const char* kEngineConfigName = "engine.conf";
inline constexpr const char* kDecisionLogName = "controller.jsonl";

}  // namespace kvlsm
