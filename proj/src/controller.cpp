// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvlsm/controller.hpp"

#include <cmath>

#include "json.hpp"
#include "kvlsm/error.hpp"

namespace kvlsm {

std::optional<WorkloadProfile> WorkloadProfile::from_stats(const OpStats& window)
{
  const double total = static_cast<double>(window.operations());
  if (total == 0) {
    return std::nullopt;
  }
  WorkloadProfile p;
  p.w = static_cast<double>(window.writes) / total;
  p.s = static_cast<double>(window.range_scans) / total;
  p.r = static_cast<double>(window.succeeded_point_reads) / total;
  p.z = static_cast<double>(window.zero_result_probes) / total;
  return p;
}

double l1_distance(const WorkloadProfile& a, const WorkloadProfile& b) noexcept
{
  return std::abs(a.w - b.w) + std::abs(a.s - b.s) + std::abs(a.r - b.r) + std::abs(a.z - b.z);
}

std::uint32_t level_count(const CostModelParams& p, std::uint32_t size_ratio)
{
  if (size_ratio < 2) {
    throw UsageError("level_count: size ratio must be >= 2");
  }
  const double ratio = p.n * p.e / p.m;
  std::uint32_t levels = 1;
  double reach = size_ratio;
  while (reach < ratio) {
    reach *= size_ratio;
    ++levels;
  }
  return levels;
}

double bloom_fpr(double bits_per_key)
{
  return std::pow(0.6185, bits_per_key);
}

OpCosts op_costs(const CostModelParams& p, std::uint32_t size_ratio, std::uint32_t runs_per_level)
{
  const double t = size_ratio;
  const double k = runs_per_level;
  const double l = level_count(p, size_ratio);
  const double fpr = bloom_fpr(p.bloom_bits);
  OpCosts c;
  c.write = t * l / (p.b * k);
  c.zero = k * l * fpr;
  c.point = k * l * fpr + 1;
  c.range = k * l + p.d_bar / p.b;
  return c;
}

double total_cost(const WorkloadProfile& profile, const CostModelParams& p,
                  std::uint32_t size_ratio, std::uint32_t runs_per_level)
{
  const OpCosts c = op_costs(p, size_ratio, runs_per_level);
  return profile.w * c.write + profile.s * c.range + profile.r * c.point + profile.z * c.zero;
}

ShapeChoice optimize(const WorkloadProfile& profile, const CostModelParams& p, std::uint32_t t_max)
{
  if (t_max < 2) {
    throw UsageError("optimize: t_max must be >= 2");
  }
  std::optional<ShapeChoice> best;
  for (std::uint32_t t = 2; t <= t_max; ++t) {
    for (std::uint32_t k = 1; k < t; ++k) {
      const double cost = total_cost(profile, p, t, k);
      if (!best || cost < best->predicted_cost) {
        best = ShapeChoice{t, k, cost};
      }
    }
  }
  return *best;
}

bool should_retune(const WorkloadProfile& previous, const WorkloadProfile& current,
                   double threshold)
{
  return l1_distance(previous, current) > threshold;
}

const char* controller_action_name(ControllerDecision::Action a) noexcept
{
  switch (a) {
    case ControllerDecision::Action::kUnderfilled:
      return "underfilled";
    case ControllerDecision::Action::kHold:
      return "hold";
    case ControllerDecision::Action::kRetune:
      return "retune";
  }
  return "unknown";
}

std::string decision_to_json(const ControllerDecision& d)
{
  nlohmann::json j;
  j["tick"] = d.tick;
  j["action"] = controller_action_name(d.action);
  j["window_ops"] = d.window_ops;
  if (d.profile) {
    j["profile"] = {{"w", d.profile->w}, {"s", d.profile->s}, {"r", d.profile->r},
                    {"z", d.profile->z}};
    j["distance"] = d.distance;
    j["params"] = {{"N", d.params.n},           {"e", d.params.e},
                   {"M", d.params.m},           {"B", d.params.b},
                   {"bloom_bits", d.params.bloom_bits}, {"d_bar", d.params.d_bar}};
  }
  if (d.choice) {
    j["choice"] = {{"T", d.choice->size_ratio},
                   {"K", d.choice->runs_per_level},
                   {"cost", d.choice->predicted_cost}};
  }
  return j.dump();
}

Controller::Controller(ControllerOptions options) : options_(std::move(options))
{
  if (options_.t_max < 2) {
    throw UsageError("controller: t_max must be >= 2");
  }
  if (!options_.decision_log.empty()) {
    log_.open(options_.decision_log, std::ios::app);
    if (!log_) {
      throw IoError("cannot open decision log " + options_.decision_log.string());
    }
  }
}

ControllerDecision Controller::tick(const OpStats& window, const CostModelParams& params)
{
  std::lock_guard lock(mu_);
  ControllerDecision d;
  d.tick = ++ticks_;
  d.window_ops = window.operations();
  d.params = params;
  if (d.window_ops < options_.window_min || d.window_ops == 0) {
    d.action = ControllerDecision::Action::kUnderfilled;
  } else {
    d.profile = WorkloadProfile::from_stats(window);
    // The first full window always sets a target.
    d.distance = last_ ? l1_distance(*last_, *d.profile) : 2.0;
    if (!last_ || should_retune(*last_, *d.profile, options_.threshold)) {
      d.action = ControllerDecision::Action::kRetune;
      d.choice = optimize(*d.profile, params, options_.t_max);
      last_ = d.profile;
      ++retunes_;
    } else {
      d.action = ControllerDecision::Action::kHold;
    }
  }
  trail_.push_back(d);
  if (log_.is_open()) {
    log_ << decision_to_json(d) << '\n';
    log_.flush();
  }
  return d;
}

std::optional<WorkloadProfile> Controller::last_retune_profile() const
{
  std::lock_guard lock(mu_);
  return last_;
}

std::vector<ControllerDecision> Controller::decisions() const
{
  std::lock_guard lock(mu_);
  return trail_;
}

std::uint64_t Controller::retunes() const
{
  std::lock_guard lock(mu_);
  return retunes_;
}

}  // namespace kvlsm
