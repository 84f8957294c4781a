// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "kvlsm/stats.hpp"

namespace kvlsm {

/// Normalized operation mix: writes, range reads, successful point reads and
/// zero-result lookups.
struct WorkloadProfile {
  double w = 0;
  double s = 0;
  double r = 0;
  double z = 0;

  /// Proportions of the four workload counters; nullopt when all are zero.
  static std::optional<WorkloadProfile> from_stats(const OpStats& window);
  double sum() const noexcept { return w + s + r + z; }
};

double l1_distance(const WorkloadProfile& a, const WorkloadProfile& b) noexcept;

struct CostModelParams {
  double n = 1;           // live entries
  double e = 1;           // average encoded pair bytes
  double m = 1;           // buffer bytes
  double b = 1;           // entries per data block
  double bloom_bits = 10; // bits per key
  double d_bar = 1;       // entries returned per range scan
};

struct OpCosts {
  double write = 0;      // W
  double range = 0;      // S
  double point = 0;      // R, key present
  double zero = 0;       // Z, key absent
};

struct ShapeChoice {
  std::uint32_t size_ratio = 2;
  std::uint32_t runs_per_level = 1;
  double predicted_cost = 0;
};

/// Smallest L >= 1 with T^L >= N*e/M.
std::uint32_t level_count(const CostModelParams& p, std::uint32_t size_ratio);

/// Bloom false-positive model 0.6185^bits.
double bloom_fpr(double bits_per_key);

OpCosts op_costs(const CostModelParams& p, std::uint32_t size_ratio, std::uint32_t runs_per_level);

double total_cost(const WorkloadProfile& profile, const CostModelParams& p,
                  std::uint32_t size_ratio, std::uint32_t runs_per_level);

/// Exhaustive argmin over 2 <= T <= t_max, 1 <= K <= T-1. Ties go to the
/// smaller T, then the smaller K.
ShapeChoice optimize(const WorkloadProfile& profile, const CostModelParams& p, std::uint32_t t_max);

/// True iff the L1 distance is strictly greater than `threshold`.
bool should_retune(const WorkloadProfile& previous, const WorkloadProfile& current,
                   double threshold);

struct ControllerOptions {
  std::uint64_t window_min = 1000;
  double threshold = 0.2;
  std::uint32_t t_max = 16;
  std::filesystem::path decision_log;  // JSON lines; empty disables
};

struct ControllerDecision {
  enum class Action { kUnderfilled, kHold, kRetune };

  std::uint64_t tick = 0;
  Action action = Action::kUnderfilled;
  std::uint64_t window_ops = 0;
  std::optional<WorkloadProfile> profile;
  double distance = 0;  // vs. the profile of the last retune
  CostModelParams params;
  std::optional<ShapeChoice> choice;  // set for kRetune

  /// The caller starts a new stats window after every evaluated tick.
  bool evaluated() const noexcept { return action != Action::kUnderfilled; }
};

const char* controller_action_name(ControllerDecision::Action a) noexcept;
std::string decision_to_json(const ControllerDecision& d);

/// Windowed profile monitor that proposes (T, K) targets. The window is an
/// operation-count window owned by the caller.
class Controller {
 public:
  explicit Controller(ControllerOptions options);

  ControllerDecision tick(const OpStats& window, const CostModelParams& params);

  std::optional<WorkloadProfile> last_retune_profile() const;
  std::vector<ControllerDecision> decisions() const;
  std::uint64_t retunes() const;
  const ControllerOptions& options() const noexcept { return options_; }

 private:
  ControllerOptions options_;
  mutable std::mutex mu_;
  std::optional<WorkloadProfile> last_;
  std::vector<ControllerDecision> trail_;
  std::uint64_t ticks_ = 0;
  std::uint64_t retunes_ = 0;
  std::ofstream log_;
};

}  // namespace kvlsm
