// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvlsm/stats.hpp"

#include <array>

namespace kvlsm {

namespace {

using Members = std::array<std::uint64_t OpStats::*, 17>;

constexpr Members kMembers = {
    &OpStats::writes,          &OpStats::succeeded_point_reads, &OpStats::range_scans,
    &OpStats::zero_result_probes, &OpStats::put_calls,          &OpStats::probe_calls,
    &OpStats::get_calls,       &OpStats::point_lookups,         &OpStats::range_scan_entries,
    &OpStats::blocks_read,     &OpStats::bytes_read,            &OpStats::bytes_written,
    &OpStats::data_block_reads, &OpStats::put_ns,               &OpStats::probe_ns,
    &OpStats::get_ns,          &OpStats::maintenance_ns,
};

}  // namespace

OpStats OpStats::operator-(const OpStats& o) const noexcept
{
  OpStats out;
  for (auto m : kMembers) {
    out.*m = this->*m - o.*m;
  }
  return out;
}

OpStats& OpStats::operator+=(const OpStats& o) noexcept
{
  for (auto m : kMembers) {
    this->*m += o.*m;
  }
  return *this;
}

OpStats AtomicOpStats::load() const noexcept
{
  OpStats out;
  for (std::size_t i = 0; i < kMembers.size(); ++i) {
    out.*kMembers[i] = f_[i].v.load(std::memory_order_relaxed);
  }
  return out;
}

void AtomicOpStats::add(const OpStats& delta) noexcept
{
  for (std::size_t i = 0; i < kMembers.size(); ++i) {
    if (const auto d = delta.*kMembers[i]; d != 0) {
      f_[i].v.fetch_add(d, std::memory_order_relaxed);
    }
  }
}

}  // namespace kvlsm
