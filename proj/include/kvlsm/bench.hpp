// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "kvlsm/backend.hpp"
#include "kvlsm/controller.hpp"

namespace kvlsm {

class Engine;

/// Staged synthetic workload. Deterministic given `seed`.
struct StagePlan {
  std::vector<double> stages = {0.2, 0.3, 0.5, 0.7, 0.5, 0.3, 0.1, 0.3, 0.5, 0.7};
  std::size_t requests_per_stage = 200;
  std::size_t prompt_tokens = 1024;
  std::size_t block_tokens = 64;
  std::size_t bytes_per_token = 1024;
  /// Each payload byte carries this many random low bits (1..8); fewer bits
  /// compress better.
  unsigned entropy_bits = 2;
  std::uint64_t seed = 42;
  std::uint64_t warmup_tokens = 1'000'000;
  /// Backend maintenance cadence, in requests (warmup puts count too).
  std::size_t maintenance_every = 50;

  void validate() const;
  std::size_t prompt_blocks() const noexcept { return prompt_tokens / block_tokens; }
  /// Blocks of pool prefix a request at hit rate `h` reuses.
  std::size_t shared_blocks(double h) const;
};

/// Per-token payload sizes for the larger model presets.
std::optional<std::size_t> bytes_per_token_preset(std::string_view name);

/// Deterministic payload for the block whose chain key is `key`.
Bytes synth_payload(const PrefixKey& key, std::size_t size, unsigned entropy_bits);

/// Warm pool: prompt-length token sequences stored during warmup.
struct WarmPool {
  std::vector<std::vector<TokenId>> sequences;
};

class WorkloadGen {
 public:
  explicit WorkloadGen(const StagePlan& plan);

  /// One prompt for a stage with expected hit rate `h`: a block-aligned
  /// prefix of a uniformly chosen pool sequence, then fresh tokens.
  std::vector<TokenId> gen_request(double h, const WarmPool& pool);
  std::vector<TokenId> fresh_tokens(std::size_t n);

 private:
  const StagePlan& plan_;
  std::mt19937_64 rng_;
};

struct StageMetrics {
  double expected_hit_rate = 0;
  double measured_hit_rate = 0;
  std::size_t requests = 0;
  std::uint64_t matched_tokens = 0;
  std::uint64_t prompt_tokens = 0;
  std::uint64_t blocks_written = 0;
  std::uint64_t bytes_read = 0;
  std::uint64_t bytes_written = 0;
  std::uint64_t probe_ns = 0;
  std::uint64_t get_ns = 0;
  std::uint64_t put_ns = 0;
  std::size_t file_count = 0;  // at stage end
};

struct TrailEntry {
  int stage = -1;  // -1 = warmup
  ControllerDecision decision;
};

struct BenchReport {
  std::string backend;
  StagePlan plan;
  std::size_t warmup_sequences = 0;
  std::uint64_t warmup_blocks = 0;
  std::uint64_t warmup_ns = 0;
  std::vector<StageMetrics> stages;
  OpStats totals;
  std::uint64_t stored_blocks = 0;
  std::size_t file_count = 0;
  std::uint64_t disk_bytes = 0;
  std::uint64_t payload_mismatches = 0;  // retrieved bytes differing from synthesis
  std::uint64_t tensor_bytes_during_index_compaction = 0;
  std::uint64_t raw_payload_bytes = 0;
  std::vector<TrailEntry> trail;
  std::uint64_t total_ns = 0;
  bool aborted = false;
  std::string error;

  std::string to_json() const;
};

/// Stores `plan.warmup_tokens` worth of fresh prompt-length sequences and
/// returns them as the shared pool.
WarmPool warmup(CacheBackend& backend, const StagePlan& plan, WorkloadGen& gen,
                BenchReport& report);

/// Warmup then the staged requests: probe, get the matched prefix, put the
/// synthesized miss suffix. Backend errors end the run with `aborted` set.
BenchReport run_bench(const StagePlan& plan, CacheBackend& backend);

}  // namespace kvlsm
