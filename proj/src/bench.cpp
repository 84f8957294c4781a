// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvlsm/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstring>

#include "json.hpp"
#include "kvlsm/engine.hpp"
#include "kvlsm/error.hpp"

namespace kvlsm {

namespace {

using Clock = std::chrono::steady_clock;
using json = nlohmann::json;

std::uint64_t elapsed_ns(Clock::time_point start)
{
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count());
}

std::uint64_t splitmix64(std::uint64_t& state)
{
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

void StagePlan::validate() const
{
  if (stages.empty()) {
    throw UsageError("stage plan has no stages");
  }
  for (double h : stages) {
    if (!(h >= 0.0 && h <= 1.0)) {
      throw UsageError("stage hit rate " + std::to_string(h) + " outside [0, 1]");
    }
  }
  if (block_tokens == 0 || prompt_tokens < block_tokens) {
    throw UsageError("prompt_tokens must hold at least one block");
  }
  if (bytes_per_token == 0) {
    throw UsageError("bytes_per_token must be positive");
  }
  if (entropy_bits < 1 || entropy_bits > 8) {
    throw UsageError("entropy_bits must be in 1..8");
  }
}

std::size_t StagePlan::shared_blocks(double h) const
{
  const double shared_tokens = std::round(h * static_cast<double>(prompt_tokens));
  const auto blocks =
      static_cast<std::size_t>(std::llround(shared_tokens / static_cast<double>(block_tokens)));
  return std::min(blocks, prompt_blocks());
}

std::optional<std::size_t> bytes_per_token_preset(std::string_view name)
{
  if (name == "40k") {
    return 40 * 1024;
  }
  if (name == "60k") {
    return 60 * 1024;
  }
  if (name == "120k") {
    return 120 * 1024;
  }
  return std::nullopt;
}

Bytes synth_payload(const PrefixKey& key, std::size_t size, unsigned entropy_bits)
{
  std::uint64_t state = fnv1a64(as_bytes(key.bytes()));
  const std::uint8_t mask = static_cast<std::uint8_t>((1u << entropy_bits) - 1);
  const std::uint64_t mask64 = 0x0101010101010101ULL * mask;
  Bytes out(size);
  std::size_t i = 0;
  for (; i + 8 <= size; i += 8) {
    const std::uint64_t v = splitmix64(state) & mask64;
    std::memcpy(out.data() + i, &v, 8);
  }
  if (i < size) {
    const std::uint64_t v = splitmix64(state) & mask64;
    std::memcpy(out.data() + i, &v, size - i);
  }
  return out;
}

WorkloadGen::WorkloadGen(const StagePlan& plan) : plan_(plan), rng_(plan.seed) {}

std::vector<TokenId> WorkloadGen::fresh_tokens(std::size_t n)
{
  std::vector<TokenId> out(n);
  for (auto& t : out) {
    t = static_cast<TokenId>(rng_());
  }
  return out;
}

std::vector<TokenId> WorkloadGen::gen_request(double h, const WarmPool& pool)
{
  std::size_t shared = plan_.shared_blocks(h) * plan_.block_tokens;
  std::vector<TokenId> out;
  out.reserve(plan_.prompt_tokens);
  if (shared > 0 && !pool.sequences.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.sequences.size() - 1);
    const auto& src = pool.sequences[pick(rng_)];
    shared = std::min(shared, src.size());
    out.assign(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(shared));
  }
  std::vector<TokenId> rest = fresh_tokens(plan_.prompt_tokens - out.size());
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

namespace {

struct Driver {
  const StagePlan& plan;
  CacheBackend& backend;
  BenchReport& report;
  Engine* engine;
  std::size_t since_maintenance = 0;
  int stage = -1;

  std::size_t block_bytes() const { return plan.block_tokens * plan.bytes_per_token; }

  void maybe_maintain()
  {
    if (plan.maintenance_every == 0 || ++since_maintenance < plan.maintenance_every) {
      return;
    }
    since_maintenance = 0;
    if (engine) {
      MaintenanceReport r = engine->maintenance_tick();
      if (r.decision && r.decision->evaluated()) {
        report.trail.push_back(TrailEntry{stage, *r.decision});
      }
    } else {
      backend.maintain();
    }
  }

  // Stores every block of `tokens`, reusing `known` for the first blocks.
  void put(const std::vector<TokenId>& tokens, std::vector<Bytes> known)
  {
    const std::vector<PrefixKey> keys = chain_keys(tokens, plan.block_tokens);
    std::vector<Bytes> payloads = std::move(known);
    for (std::size_t i = payloads.size(); i < keys.size(); ++i) {
      payloads.push_back(synth_payload(keys[i], block_bytes(), plan.entropy_bits));
      report.raw_payload_bytes += block_bytes();
    }
    std::vector<ByteView> views(payloads.begin(), payloads.end());
    report.stored_blocks += backend.put_batch(tokens, views);
  }
};

}  // namespace

WarmPool warmup(CacheBackend& backend, const StagePlan& plan, WorkloadGen& gen,
                BenchReport& report)
{
  Engine* engine = dynamic_cast<Engine*>(&backend);
  Driver d{plan, backend, report, engine};
  WarmPool pool;
  const auto start = Clock::now();
  const std::uint64_t before = backend.total_stats().writes;
  std::uint64_t tokens = 0;
  while (tokens < plan.warmup_tokens) {
    std::vector<TokenId> seq = gen.fresh_tokens(plan.prompt_blocks() * plan.block_tokens);
    d.put(seq, {});
    tokens += seq.size();
    pool.sequences.push_back(std::move(seq));
    d.maybe_maintain();
  }
  report.warmup_sequences = pool.sequences.size();
  report.warmup_blocks = backend.total_stats().writes - before;
  report.warmup_ns = elapsed_ns(start);
  return pool;
}

BenchReport run_bench(const StagePlan& plan, CacheBackend& backend)
{
  plan.validate();
  if (backend.block_tokens() != plan.block_tokens) {
    throw UsageError("backend block size " + std::to_string(backend.block_tokens()) +
                     " differs from the plan's " + std::to_string(plan.block_tokens));
  }
  BenchReport report;
  report.backend = backend.name();
  report.plan = plan;
  const auto start = Clock::now();
  Engine* engine = dynamic_cast<Engine*>(&backend);
  Driver d{plan, backend, report, engine};

  try {
    WorkloadGen gen(plan);
    const WarmPool pool = warmup(backend, plan, gen, report);

    for (std::size_t s = 0; s < plan.stages.size(); ++s) {
      d.stage = static_cast<int>(s);
      StageMetrics m;
      m.expected_hit_rate = plan.stages[s];
      const OpStats before = backend.total_stats();
      double hit_sum = 0;
      for (std::size_t q = 0; q < plan.requests_per_stage; ++q) {
        const std::vector<TokenId> tokens = gen.gen_request(plan.stages[s], pool);
        const ProbeResult pr = backend.probe(tokens);
        std::vector<Bytes> got = backend.get_batch(tokens, pr.matched_blocks);
        const std::vector<PrefixKey> keys = chain_keys(tokens, plan.block_tokens);
        for (std::size_t i = 0; i < got.size(); ++i) {
          if (got[i] != synth_payload(keys[i], d.block_bytes(), plan.entropy_bits)) {
            ++report.payload_mismatches;
          }
        }
        d.put(tokens, std::move(got));
        hit_sum += static_cast<double>(pr.matched_tokens) / static_cast<double>(tokens.size());
        m.matched_tokens += pr.matched_tokens;
        m.prompt_tokens += tokens.size();
        ++m.requests;
        d.maybe_maintain();
      }
      const OpStats delta = backend.total_stats() - before;
      m.measured_hit_rate = m.requests ? hit_sum / static_cast<double>(m.requests) : 0.0;
      m.blocks_written = delta.writes;
      m.bytes_read = delta.bytes_read;
      m.bytes_written = delta.bytes_written;
      m.probe_ns = delta.probe_ns;
      m.get_ns = delta.get_ns;
      m.put_ns = delta.put_ns;
      m.file_count = backend.file_count();
      report.stages.push_back(m);
    }
  } catch (const Error& e) {
    report.aborted = true;
    report.error = e.what();
  }

  report.totals = backend.total_stats();
  report.file_count = backend.file_count();
  report.disk_bytes = backend.disk_bytes();
  if (engine) {
    report.tensor_bytes_during_index_compaction = engine->tensor_bytes_during_index_compaction();
  }
  report.total_ns = elapsed_ns(start);
  return report;
}

std::string BenchReport::to_json() const
{
  json j;
  j["backend"] = backend;
  j["plan"] = {{"stages", plan.stages},
               {"requests_per_stage", plan.requests_per_stage},
               {"prompt_tokens", plan.prompt_tokens},
               {"block_tokens", plan.block_tokens},
               {"bytes_per_token", plan.bytes_per_token},
               {"entropy_bits", plan.entropy_bits},
               {"seed", plan.seed},
               {"warmup_tokens", plan.warmup_tokens},
               {"maintenance_every", plan.maintenance_every}};
  j["warmup"] = {{"sequences", warmup_sequences},
                 {"blocks", warmup_blocks},
                 {"seconds", static_cast<double>(warmup_ns) / 1e9}};
  json st = json::array();
  for (const StageMetrics& m : stages) {
    st.push_back({{"expected_hit_rate", m.expected_hit_rate},
                  {"measured_hit_rate", m.measured_hit_rate},
                  {"requests", m.requests},
                  {"matched_tokens", m.matched_tokens},
                  {"prompt_tokens", m.prompt_tokens},
                  {"blocks_written", m.blocks_written},
                  {"bytes_read", m.bytes_read},
                  {"bytes_written", m.bytes_written},
                  {"probe_ms", static_cast<double>(m.probe_ns) / 1e6},
                  {"get_ms", static_cast<double>(m.get_ns) / 1e6},
                  {"put_ms", static_cast<double>(m.put_ns) / 1e6},
                  {"file_count", m.file_count}});
  }
  j["stages"] = st;
  j["totals"] = {{"writes", totals.writes},
                 {"succeeded_point_reads", totals.succeeded_point_reads},
                 {"range_scans", totals.range_scans},
                 {"zero_result_probes", totals.zero_result_probes},
                 {"point_lookups", totals.point_lookups},
                 {"blocks_read", totals.blocks_read},
                 {"bytes_read", totals.bytes_read},
                 {"bytes_written", totals.bytes_written},
                 {"data_block_reads", totals.data_block_reads}};
  j["stored_blocks"] = stored_blocks;
  j["file_count"] = file_count;
  j["disk_bytes"] = disk_bytes;
  j["raw_payload_bytes"] = raw_payload_bytes;
  j["payload_mismatches"] = payload_mismatches;
  j["tensor_bytes_during_index_compaction"] = tensor_bytes_during_index_compaction;
  json trail_json = json::array();
  for (const TrailEntry& t : trail) {
    json e = json::parse(decision_to_json(t.decision));
    e["stage"] = t.stage;
    trail_json.push_back(std::move(e));
  }
  j["controller_trail"] = trail_json;
  j["seconds"] = static_cast<double>(total_ns) / 1e9;
  j["aborted"] = aborted;
  if (aborted) {
    j["error"] = error;
  }
  return j.dump(2);
}

}  // namespace kvlsm
