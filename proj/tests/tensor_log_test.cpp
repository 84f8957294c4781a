// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#include <map>

#include "doctest.h"
#include "kvlsm/error.hpp"
#include "kvlsm/tensor_log.hpp"
#include "test_util.hpp"

using namespace kvlsm;
using kvlsm::testing::TempDir;

namespace {

struct Stored {
  PrefixKey key;
  Bytes payload;
};

std::vector<Stored> make_records(std::mt19937_64& rng, std::size_t n, std::size_t payload_bytes)
{
  std::vector<Stored> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto tokens = testing::random_tokens(rng, 8);
    out.push_back({chain_keys(tokens, 4).back(), testing::random_bytes(rng, payload_bytes)});
  }
  return out;
}

std::vector<TensorLocation> append(TensorLog& log, const std::vector<Stored>& recs)
{
  std::vector<LogAppend> batch;
  for (const auto& r : recs) {
    batch.push_back(LogAppend{&r.key, r.payload, CodecId::kRaw,
                              static_cast<std::uint32_t>(r.payload.size())});
  }
  return log.append_batch(batch);
}

}  // namespace

TEST_CASE("record layout")
{
  const PrefixKey key = PrefixKey::from_bytes(std::string("\x01\x02\x03\x04\x05\x06\x07\x08", 8));
  const Bytes payload = {0xde, 0xad};
  Bytes rec = encode_log_record(key, payload, CodecId::kZlib, 77);
  REQUIRE(rec.size() == log_record_size(8, 2));
  CHECK(std::string(rec.begin(), rec.begin() + 4) == "TLG1");
  CHECK(decode_fixed16(rec.data() + 4) == 1);
  CHECK(rec[6] == 0x01);
  CHECK(rec[13] == 0x08);
  CHECK(rec[14] == 1);
  CHECK(decode_fixed32(rec.data() + 15) == 77);
  CHECK(decode_fixed32(rec.data() + 19) == 2);
  CHECK(rec[27] == 0xde);
  CHECK(tensor_log_file_name(0x1a) == "tlog-0000001a.dat");
}

TEST_CASE("append and read back")
{
  TempDir dir;
  auto log = TensorLog::open(dir.path(), {});
  CHECK(log->append_batch({}).empty());
  CHECK(log->stats().fsyncs == 0);
  CHECK(log->read_batch({}).empty());

  std::mt19937_64 rng(1);
  auto recs = make_records(rng, 3, 100);
  auto locs = append(*log, recs);
  REQUIRE(locs.size() == 3);
  CHECK(locs[0].file_id == locs[2].file_id);
  CHECK(locs[0].offset < locs[1].offset);
  CHECK(locs[1].offset < locs[2].offset);
  CHECK(log->stats().fsyncs == 1);

  auto got = log->read_batch(locs);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(got[i].payload == recs[i].payload);
    CHECK(got[i].key == recs[i].key);
  }
}

TEST_CASE("contiguous reads are coalesced")
{
  TempDir dir;
  auto log = TensorLog::open(dir.path(), {});
  std::mt19937_64 rng(2);
  auto recs = make_records(rng, 64, 512);
  auto locs = append(*log, recs);
  const auto before = log->stats().read_calls;
  auto got = log->read_batch(locs);
  CHECK(log->stats().read_calls - before < 64);
  CHECK(log->stats().read_calls - before == 1);
  CHECK(got[63].payload == recs[63].payload);
}

TEST_CASE("rollover past file_cap")
{
  TempDir dir;
  TensorLogOptions opts;
  opts.file_cap = 1000;
  auto log = TensorLog::open(dir.path(), opts);
  std::mt19937_64 rng(3);
  auto recs = make_records(rng, 4, 300);  // 335 B per record, 2 fit
  auto locs = append(*log, recs);
  CHECK(log->file_count() == 2);
  CHECK(locs[1].file_id == locs[0].file_id);
  CHECK(locs[2].file_id == locs[0].file_id + 1);
  CHECK(locs[2].offset == 0);
  auto got = log->read_batch(locs);
  CHECK(got[3].payload == recs[3].payload);
}

TEST_CASE("corruption and stale locations")
{
  TempDir dir;
  auto log = TensorLog::open(dir.path(), {});
  std::mt19937_64 rng(4);
  auto recs = make_records(rng, 2, 64);
  auto locs = append(*log, recs);
  {
    std::FILE* f = std::fopen((dir / tensor_log_file_name(locs[1].file_id)).c_str(), "r+b");
    std::fseek(f, static_cast<long>(locs[1].offset + locs[1].length - 1), SEEK_SET);
    std::fputc(0x5a ^ recs[1].payload.back(), f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(log->read_batch(std::span(locs).subspan(1)), CorruptionError);
  CHECK(log->read_batch(std::span(locs).first(1))[0].payload == recs[0].payload);
  TensorLocation missing{999, 0, 40};
  CHECK_THROWS_AS(log->read_batch(std::span(&missing, 1)), StaleLocationError);
}

TEST_CASE("torn tail is truncated on reopen")
{
  TempDir dir;
  FaultInjector fault;
  std::mt19937_64 rng(5);
  auto first = make_records(rng, 2, 128);
  auto second = make_records(rng, 1, 128);
  std::vector<TensorLocation> locs;
  {
    TensorLogOptions opts;
    opts.fault = &fault;
    auto log = TensorLog::open(dir.path(), opts);
    locs = append(*log, first);
    fault.arm("tlog.append.torn");
    CHECK_THROWS_AS(append(*log, second), CrashInjected);
  }
  auto log = TensorLog::open(dir.path(), {});
  CHECK(log->total_bytes() == locs[1].offset + locs[1].length);
  std::size_t seen = 0;
  log->scan_file(locs[0].file_id, [&](const LogRecord&, const TensorLocation&) { ++seen; });
  CHECK(seen == 2);
  auto again = append(*log, second);
  CHECK(again[0].offset == locs[1].offset + locs[1].length);
}

TEST_CASE("io error during append rolls back")
{
  TempDir dir;
  FaultInjector fault;
  TensorLogOptions opts;
  opts.fault = &fault;
  auto log = TensorLog::open(dir.path(), opts);
  std::mt19937_64 rng(6);
  auto recs = make_records(rng, 3, 64);
  fault.arm("tlog.append.before_sync", 1, FaultInjector::Mode::kIoError);
  CHECK_THROWS_AS(append(*log, recs), IoError);
  CHECK(log->total_bytes() == 0);
  auto locs = append(*log, recs);
  CHECK(locs[0].offset == 0);
}

TEST_CASE("merge drops dead records and remaps live ones")
{
  TempDir dir;
  TensorLogOptions opts;
  opts.file_cap = 2048;
  auto log = TensorLog::open(dir.path(), opts);
  std::mt19937_64 rng(7);

  // 12 files of three records each; the last is the active file.
  std::map<std::string, std::pair<TensorLocation, Bytes>> index;
  std::vector<Stored> all;
  for (int f = 0; f < 12; ++f) {
    auto recs = make_records(rng, 3, 500);
    auto locs = append(*log, recs);
    for (std::size_t i = 0; i < recs.size(); ++i) {
      // Two records per file are orphans that never reached the index.
      if (i == 0) {
        index[recs[i].key.bytes()] = {locs[i], recs[i].payload};
      }
    }
  }
  REQUIRE(log->file_count() == 12);

  // No-op when already under the bound.
  CHECK(log->merge_files([](auto&&, auto&&) { return true; }, 12).empty());

  auto live = [&](const PrefixKey& key, const TensorLocation& loc) {
    auto it = index.find(key.bytes());
    return it != index.end() && it->second.first == loc;
  };
  MergeResult r = log->merge_files(live, 8);
  CHECK(!r.remap.empty());
  CHECK(r.records_dropped > 0);
  CHECK(r.bytes_reclaimed > 0);
  for (const RemapEntry& e : r.remap) {
    auto& slot = index.at(e.key.bytes());
    CHECK(slot.first == e.from);
    slot.first = e.to;
  }
  log->retire_files(r.retired);
  CHECK(log->file_count() <= 8);

  std::vector<TensorLocation> locs;
  std::vector<Bytes> expect;
  for (const auto& [k, v] : index) {
    locs.push_back(v.first);
    expect.push_back(v.second);
  }
  auto got = log->read_batch(locs);
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].payload == expect[i]);
  }

  // Survives a reopen.
  log.reset();
  log = TensorLog::open(dir.path(), opts);
  CHECK(log->file_count() <= 8);
  got = log->read_batch(locs);
  CHECK(got.back().payload == expect.back());
}

TEST_CASE("file holding only an orphan is reclaimed")
{
  TempDir dir;
  TensorLogOptions opts;
  opts.file_cap = 600;
  auto log = TensorLog::open(dir.path(), opts);
  std::mt19937_64 rng(8);
  auto orphan = make_records(rng, 1, 500);
  append(*log, orphan);
  auto kept = make_records(rng, 1, 500);
  auto kept_loc = append(*log, kept);
  append(*log, make_records(rng, 1, 500));  // becomes the active file
  REQUIRE(log->file_count() == 3);
  auto r = log->merge_files(
      [&](const PrefixKey& k, const TensorLocation& loc) {
        return k == kept[0].key && loc == kept_loc[0];
      },
      2);
  CHECK(r.records_dropped == 1);
  CHECK(r.remap.empty());
  REQUIRE(r.retired.size() == 1);
  CHECK(r.bytes_reclaimed > 500);
  log->retire_files(r.retired);
  CHECK(log->file_count() == 2);
}
