// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

// Kill-point trials: run a put/maintenance workload with one injected crash,
// reopen, and check that every acknowledged write is intact and nothing in
// the index dangles.

#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kvlsm/engine.hpp"
#include "kvlsm/fault.hpp"
#include "model.hpp"

namespace kvlsm::testing {

inline const std::vector<std::string>& crash_points()
{
  static const std::vector<std::string> points = {
      "engine.put.before_log_append",
      "tlog.append.torn",
      "tlog.append.before_sync",
      "engine.put.between_phases",
      "wal.append.torn",
      "wal.append.before_sync",
      "lsm.put.after_wal",
      "engine.put.after_index",
      "lsm.flush.after_run_write",
      "manifest.after_tmp_write",
      "lsm.flush.after_manifest",
      "lsm.compact.after_output_write",
      "lsm.compact.after_manifest",
      "tlog.merge.torn",
      "tlog.merge.after_output",
      "engine.merge.after_index_update",
      "tlog.retire.after_unlink",
      "engine.merge.after_retire",
  };
  return points;
}

inline EngineConfig crash_config()
{
  EngineConfig c;
  c.block_tokens = 4;
  c.shape.size_ratio = 2;
  c.shape.runs_per_level = 1;
  c.shape.buffer_bytes = 600;
  c.file_cap = 1500;
  c.merge_threshold = 3;
  c.codec = CodecId::kRaw;
  c.controller_enabled = true;
  c.window_min = 40;
  return c;
}

struct CrashTrial {
  bool crashed = false;
  std::string failure;  // empty when every check passed
  std::size_t acked_sequences = 0;
};

class CrashHarness {
 public:
  static constexpr int kOps = 48;

  /// Hit counts of every kill point for one uninterrupted run of `seed`.
  static std::map<std::string, int> dry_run(const std::filesystem::path& dir, std::uint64_t seed)
  {
    FaultInjector fault;
    CrashHarness h(dir, seed);
    auto e = Engine::open(dir, crash_config(), &fault);
    h.drive(*e);
    return fault.hit_counts();
  }

  static CrashTrial trial(const std::filesystem::path& dir, std::uint64_t seed,
                          const std::string& point, int countdown)
  {
    CrashHarness h(dir, seed);
    CrashTrial result;
    {
      FaultInjector fault;
      fault.arm(point, countdown);
      try {
        // Opening a fresh store writes a manifest, so kill points can fire here too.
        auto e = Engine::open(dir, crash_config(), &fault);
        h.drive(*e);
      } catch (const CrashInjected&) {
        result.crashed = true;
      }
    }
    result.acked_sequences = h.acked_.size();
    result.failure = h.check_after_recovery();
    return result;
  }

 private:
  CrashHarness(std::filesystem::path dir, std::uint64_t seed)
      : dir_(std::move(dir)), gen_(seed, 4, 6), model_(4)
  {
  }

  void drive(Engine& e)
  {
    for (int op = 0; op < kOps; ++op) {
      std::vector<TokenId> t = gen_.next();
      if (t.size() < 4) {
        t.resize(4, 7);
      }
      const auto p = gen_.payloads(t.size() / 4, 120);
      pending_ = {t, p};
      e.put_batch(t, views(p));
      model_.put(t, p);
      acked_.push_back(t);
      pending_.reset();
      if (op % 6 == 5) {
        e.maintenance_tick();
      }
    }
  }

  // Returns a description of the first violated property, or "".
  std::string check(Engine& e, const ReferenceModel& strict, const ReferenceModel& loose,
                    const std::vector<std::vector<TokenId>>& seqs)
  {
    for (const auto& t : seqs) {
      const std::size_t need = strict.probe(t);
      const std::size_t d = e.probe(t).matched_blocks;
      if (d < need) {
        return "acknowledged depth " + std::to_string(need) + " but probe found " +
               std::to_string(d);
      }
      if (d > loose.probe(t)) {
        return "probe found depth " + std::to_string(d) + " that was never written";
      }
      std::vector<Bytes> got;
      try {
        got = e.get_batch(t, d);
      } catch (const Error& err) {
        return std::string("get_batch(probe(x)) failed: ") + err.what();
      }
      if (got != loose.get(t, d)) {
        return "payload differs from what was written";
      }
    }
    const IntegrityReport integrity = e.verify();
    if (!integrity.ok()) {
      return "dangling index entries: " + std::to_string(integrity.dangling) +
             (integrity.problems.empty() ? "" : " (" + integrity.problems.front() + ")");
    }
    return "";
  }

  std::string check_after_recovery()
  {
    try {
      // `loose` also admits whatever part of the interrupted put survived.
      ReferenceModel loose = model_;
      std::vector<std::vector<TokenId>> seqs = acked_;
      if (pending_) {
        loose.put(pending_->first, pending_->second);
        seqs.push_back(pending_->first);
      }
      auto e = Engine::open(dir_, crash_config());
      if (std::string f = check(*e, model_, loose, seqs); !f.empty()) {
        return "after recovery: " + f;
      }

      // Adopt the surviving part of the interrupted put, then keep going.
      ReferenceModel model = model_;
      if (pending_) {
        const auto& [t, p] = *pending_;
        const std::size_t d = e->probe(t).matched_blocks;
        const std::vector<TokenId> kept(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(d * 4));
        model.put(kept, std::vector<Bytes>(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(d)));
      }
      for (int i = 0; i < 12; ++i) {
        std::vector<TokenId> t = gen_.next();
        const auto p = gen_.payloads(t.size() / 4, 120);
        e->put_batch(t, views(p));
        model.put(t, p);
        seqs.push_back(t);
      }
      e->compact_to_fixpoint();
      e->maintenance_tick();
      if (e->log().file_count() > crash_config().merge_threshold) {
        return "tensor file count " + std::to_string(e->log().file_count()) +
               " above threshold after maintenance";
      }
      if (std::string f = check(*e, model, model, seqs); !f.empty()) {
        return "after continued work: " + f;
      }
      e.reset();
      e = Engine::open(dir_, crash_config());
      if (std::string f = check(*e, model, model, seqs); !f.empty()) {
        return "after second reopen: " + f;
      }
    } catch (const std::exception& err) {
      return std::string("exception: ") + err.what();
    }
    return "";
  }

  std::filesystem::path dir_;
  SequenceGen gen_;
  ReferenceModel model_;
  std::vector<std::vector<TokenId>> acked_;
  std::optional<std::pair<std::vector<TokenId>, std::vector<Bytes>>> pending_;
};

}  // namespace kvlsm::testing
