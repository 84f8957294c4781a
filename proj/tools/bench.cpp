// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

// bench: staged workload driver and store inspection.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "kvlsm/baseline_fpo.hpp"
#include "kvlsm/bench.hpp"
#include "kvlsm/engine.hpp"
#include "kvlsm/error.hpp"

namespace fs = std::filesystem;
using namespace kvlsm;

namespace {

std::vector<double> parse_stages(const std::string& text)
{
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) {
        throw std::invalid_argument(item);
      }
    } catch (const std::logic_error&) {
      throw UsageError("bad stage hit rate '" + item + "'");
    }
  }
  return out;
}

bool dir_has_entries(const fs::path& dir)
{
  return fs::exists(dir) && !fs::is_empty(dir);
}

void print_shape(const char* label, const LsmShape& s)
{
  std::printf("%s T=%u K=%u M=%llu bloom_bits=%u\n", label, s.size_ratio, s.runs_per_level,
              static_cast<unsigned long long>(s.buffer_bytes), s.bloom_bits_per_key);
}

int cmd_run(const std::string& backend_name, const StagePlan& plan, const fs::path& dir,
            const std::string& out, const std::string& config_path, bool no_controller,
            bool overwrite)
{
  if (dir_has_entries(dir)) {
    if (!overwrite) {
      std::fprintf(stderr, "bench: %s is not empty (pass --overwrite to replace it)\n",
                   dir.c_str());
      return 2;
    }
    fs::remove_all(dir);
  }

  EngineConfig config;
  if (!config_path.empty()) {
    config = EngineConfig::load(config_path);
  }
  config.block_tokens = plan.block_tokens;
  if (no_controller) {
    config.controller_enabled = false;
  }

  std::unique_ptr<CacheBackend> backend;
  if (backend_name == "lsm") {
    backend = Engine::open(dir, config);
  } else {
    backend = FpoBackend::open(dir, FpoOptions{plan.block_tokens, config.codec, config.zlib_level});
  }

  const BenchReport report = run_bench(plan, *backend);
  const std::string text = report.to_json();
  if (out.empty() || out == "-") {
    std::cout << text << '\n';
  } else {
    std::ofstream f(out);
    f << text << '\n';
    if (!f) {
      std::fprintf(stderr, "bench: cannot write %s\n", out.c_str());
      return 1;
    }
  }

  std::fprintf(stderr, "%-6s %-9s %-9s %s\n", "stage", "expected", "measured", "files");
  for (std::size_t i = 0; i < report.stages.size(); ++i) {
    const StageMetrics& m = report.stages[i];
    std::fprintf(stderr, "%-6zu %-9.3f %-9.4f %zu\n", i, m.expected_hit_rate, m.measured_hit_rate,
                 m.file_count);
  }
  std::fprintf(stderr, "backend=%s stored_blocks=%llu files=%zu disk_bytes=%llu seconds=%.1f\n",
               report.backend.c_str(), static_cast<unsigned long long>(report.stored_blocks),
               report.file_count, static_cast<unsigned long long>(report.disk_bytes),
               static_cast<double>(report.total_ns) / 1e9);
  if (report.aborted) {
    std::fprintf(stderr, "bench: aborted: %s\n", report.error.c_str());
    return 1;
  }
  return 0;
}

int cmd_inspect(const fs::path& dir)
{
  if (!fs::exists(dir / kEngineConfigName)) {
    std::size_t kv = 0;
    if (fs::is_directory(dir)) {
      for (const auto& e : fs::directory_iterator(dir)) {
        kv += e.path().extension() == ".kv" ? 1 : 0;
      }
    }
    if (kv == 0) {
      std::fprintf(stderr, "bench: %s holds no store\n", dir.c_str());
      return 2;
    }
    std::printf("backend fpo\nfiles %zu\n", kv);
    return 0;
  }

  auto engine = Engine::open_existing(dir);
  const LsmIndex& index = engine->index();
  std::printf("backend lsm\n");
  std::printf("block_tokens %zu\n", engine->config().block_tokens);
  print_shape("shape.current", index.current_shape());
  print_shape("shape.target ", index.target_shape());
  std::printf("memtable entries=%zu bytes=%llu\n", index.memtable_entries(),
              static_cast<unsigned long long>(index.memtable_bytes()));
  const LsmShape cur = index.current_shape();
  for (const LevelInfo& level : index.levels()) {
    std::uint64_t entries = 0;
    for (const RunInfo& r : level.runs) {
      entries += r.entry_count;
    }
    std::printf("level %zu runs=%zu entries=%llu bytes=%llu capacity=%.0f\n", level.level,
                level.runs.size(), static_cast<unsigned long long>(entries),
                static_cast<unsigned long long>(level.logical_bytes()),
                level_capacity(cur, level.level));
  }
  std::printf("index.files %zu\n", index.file_count());
  std::printf("tlog.files %zu bytes=%llu\n", engine->log().file_count(),
              static_cast<unsigned long long>(engine->log().total_bytes()));
  std::printf("files %zu\ndisk_bytes %llu\n", engine->file_count(),
              static_cast<unsigned long long>(engine->disk_bytes()));
  return 0;
}

int cmd_compact(const fs::path& dir)
{
  auto engine = Engine::open_existing(dir);
  const std::size_t before = engine->file_count();
  const MaintenanceReport r = engine->compact_to_fixpoint();
  engine->index().flush();
  std::printf("compactions %zu runs_merged %llu index_bytes_rewritten %llu\n",
              r.compaction.actions.size(),
              static_cast<unsigned long long>(r.compaction.runs_merged),
              static_cast<unsigned long long>(r.compaction.bytes_rewritten));
  std::printf("tlog_files %zu -> %zu bytes_reclaimed %llu\n", r.log_files_before,
              r.log_files_after, static_cast<unsigned long long>(r.bytes_reclaimed));
  std::printf("files %zu -> %zu\n", before, engine->file_count());
  return 0;
}

// Checks every index entry against the tensor log. Exit 1 on dangling entries.
int cmd_verify(const fs::path& dir)
{
  auto engine = Engine::open_existing(dir);
  const IntegrityReport r = engine->verify();
  std::printf("entries %llu dangling %llu\n", static_cast<unsigned long long>(r.entries),
              static_cast<unsigned long long>(r.dangling));
  for (const std::string& p : r.problems) {
    std::fprintf(stderr, "  %s\n", p.c_str());
  }
  return r.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"kvlsm staged workload bench"};
  app.require_subcommand(1);

  StagePlan plan;
  std::string backend = "lsm";
  std::string stages = "0.2,0.3,0.5,0.7,0.5,0.3,0.1,0.3,0.5,0.7";
  std::string preset;
  fs::path run_dir;
  std::string out;
  std::string config_path;
  bool no_controller = false;
  bool overwrite = false;

  CLI::App* run = app.add_subcommand("run", "Warm up a store and drive the staged workload");
  run->add_option("--backend", backend, "Storage backend")->check(CLI::IsMember({"lsm", "fpo"}));
  run->add_option("--stages", stages, "Comma-separated expected hit rate per stage");
  run->add_option("--requests", plan.requests_per_stage, "Requests per stage");
  run->add_option("--prompt-tokens", plan.prompt_tokens, "Tokens per prompt");
  run->add_option("--block-tokens", plan.block_tokens, "Tokens per cached block");
  auto* bpt = run->add_option("--bytes-per-token", plan.bytes_per_token, "Payload bytes per token");
  run->add_option("--preset", preset, "Per-token payload preset")
      ->check(CLI::IsMember({"40k", "60k", "120k"}))
      ->excludes(bpt);
  run->add_option("--entropy-bits", plan.entropy_bits, "Random bits per payload byte (1-8)");
  run->add_option("--warmup-tokens", plan.warmup_tokens, "Tokens stored before the first stage");
  run->add_option("--maintenance-every", plan.maintenance_every, "Requests between maintenance ticks");
  run->add_option("--seed", plan.seed, "Workload seed");
  run->add_option("--dir", run_dir, "Store directory")->required();
  run->add_option("--out", out, "JSON report path ('-' for stdout)");
  run->add_option("--config", config_path, "Engine config file (key = value)");
  run->add_flag("--no-controller", no_controller, "Keep the initial LSM shape");
  run->add_flag("--overwrite", overwrite, "Delete a non-empty --dir first");

  fs::path inspect_dir;
  CLI::App* inspect = app.add_subcommand("inspect", "Print shape, level occupancy and file counts");
  inspect->add_option("--dir", inspect_dir, "Store directory")->required();

  fs::path compact_dir;
  CLI::App* compact = app.add_subcommand("compact", "Run maintenance until nothing is left to do");
  compact->add_option("--dir", compact_dir, "Store directory")->required();

  fs::path verify_dir;
  CLI::App* verify = app.add_subcommand("verify", "Check that no index entry dangles");
  verify->add_option("--dir", verify_dir, "Store directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      plan.stages = parse_stages(stages);
      if (!preset.empty()) {
        plan.bytes_per_token = *bytes_per_token_preset(preset);
      }
      return cmd_run(backend, plan, run_dir, out, config_path, no_controller, overwrite);
    }
    if (*inspect) {
      return cmd_inspect(inspect_dir);
    }
    if (*verify) {
      return cmd_verify(verify_dir);
    }
    return cmd_compact(compact_dir);
  } catch (const Error& e) {
    std::fprintf(stderr, "bench: %s error: %s\n", error_code_name(e.code()), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "bench: %s\n", e.what());
    return 1;
  }
}
