// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>

namespace kvlsm {

/// Per-operation counters of a cache backend. The first four fields are the
/// workload classes the controller weighs.
struct OpStats {
  std::uint64_t writes = 0;                 // blocks stored by put_batch
  std::uint64_t succeeded_point_reads = 0;  // present-key lookups during probe
  std::uint64_t range_scans = 0;            // get_batch calls that did I/O
  std::uint64_t zero_result_probes = 0;     // probes that matched nothing

  std::uint64_t put_calls = 0;
  std::uint64_t probe_calls = 0;
  std::uint64_t get_calls = 0;
  std::uint64_t point_lookups = 0;       // all probe lookups, hit or miss
  std::uint64_t range_scan_entries = 0;  // index entries returned by scans
  std::uint64_t blocks_read = 0;
  std::uint64_t bytes_read = 0;     // decoded payload bytes returned
  std::uint64_t bytes_written = 0;  // bytes appended to storage
  std::uint64_t data_block_reads = 0;

  std::uint64_t put_ns = 0;
  std::uint64_t probe_ns = 0;
  std::uint64_t get_ns = 0;
  std::uint64_t maintenance_ns = 0;

  /// Operation count the controller window is measured in.
  std::uint64_t operations() const noexcept
  {
    return writes + succeeded_point_reads + range_scans + zero_result_probes;
  }

  OpStats operator-(const OpStats& o) const noexcept;
  OpStats& operator+=(const OpStats& o) noexcept;
};

/// Lock-free accumulator behind OpStats.
class AtomicOpStats {
 public:
  OpStats load() const noexcept;
  void add(const OpStats& delta) noexcept;

 private:
  struct Field {
    std::atomic<std::uint64_t> v{0};
  };
  Field f_[17];
};

}  // namespace kvlsm
