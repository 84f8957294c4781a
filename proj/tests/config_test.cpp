// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>

#include "doctest.h"
#include "kvlsm/config.hpp"
#include "kvlsm/error.hpp"
#include "test_util.hpp"

using namespace kvlsm;

TEST_CASE("empty text gives the defaults")
{
  const EngineConfig c = EngineConfig::parse("");
  const EngineConfig d;
  CHECK(c.block_tokens == 64);
  CHECK(c.shape == d.shape);
  CHECK(c.file_cap == d.file_cap);
  CHECK(c.merge_threshold == d.merge_threshold);
  CHECK(c.codec == CodecId::kZlib);
  CHECK(c.controller_enabled);
  CHECK(c.window_min == 1000);
  CHECK(c.retune_threshold == 0.2);
  CHECK(c.t_max == 16);
}

TEST_CASE("parse reads every key, comments and quotes")
{
  const EngineConfig c = EngineConfig::parse(R"(
# store layout
block_tokens = 32
buffer_bytes = 65536   # 64 KiB
size_ratio = 6
runs_per_level = 3
bloom_bits_per_key = 8
file_cap = 1048576
merge_threshold = 12
codec = "raw"
zlib_level = 4
controller = off
window_min = 500
retune_threshold = 0.35
t_max = 10
)");
  CHECK(c.block_tokens == 32);
  CHECK(c.shape.buffer_bytes == 65536);
  CHECK(c.shape.size_ratio == 6);
  CHECK(c.shape.runs_per_level == 3);
  CHECK(c.shape.bloom_bits_per_key == 8);
  CHECK(c.file_cap == 1048576);
  CHECK(c.merge_threshold == 12);
  CHECK(c.codec == CodecId::kRaw);
  CHECK(c.zlib_level == 4);
  CHECK_FALSE(c.controller_enabled);
  CHECK(c.window_min == 500);
  CHECK(c.retune_threshold == 0.35);
  CHECK(c.t_max == 10);
}

TEST_CASE("to_string round-trips through parse")
{
  EngineConfig c;
  c.block_tokens = 16;
  c.shape.size_ratio = 9;
  c.shape.runs_per_level = 8;
  c.codec = CodecId::kRaw;
  c.controller_enabled = false;
  c.retune_threshold = 0.1 + 0.2;
  const EngineConfig back = EngineConfig::parse(c.to_string());
  CHECK(back.to_string() == c.to_string());
  CHECK(back.shape == c.shape);
  CHECK(back.retune_threshold == c.retune_threshold);
}

TEST_CASE("save and load")
{
  kvlsm::testing::TempDir dir;
  EngineConfig c;
  c.merge_threshold = 3;
  c.save(dir / "engine.conf");
  CHECK(EngineConfig::load(dir / "engine.conf").merge_threshold == 3);
  CHECK_THROWS_AS(EngineConfig::load(dir / "missing.conf"), IoError);
}

TEST_CASE("bad input is a usage error")
{
  CHECK_THROWS_AS(EngineConfig::parse("colour = blue"), UsageError);
  CHECK_THROWS_AS(EngineConfig::parse("block_tokens"), UsageError);
  CHECK_THROWS_AS(EngineConfig::parse("block_tokens = -4"), UsageError);
  CHECK_THROWS_AS(EngineConfig::parse("block_tokens = 4x"), UsageError);
  CHECK_THROWS_AS(EngineConfig::parse("block_tokens = 0"), UsageError);
  CHECK_THROWS_AS(EngineConfig::parse("codec = lz4"), UsageError);
  CHECK_THROWS_AS(EngineConfig::parse("controller = maybe"), UsageError);
  CHECK_THROWS_AS(EngineConfig::parse("retune_threshold = -1"), UsageError);
  // K must stay below T.
  CHECK_THROWS_AS(EngineConfig::parse("size_ratio = 4\nruns_per_level = 4"), UsageError);
  CHECK_THROWS_AS(EngineConfig::parse("merge_threshold = 1"), UsageError);
  CHECK_THROWS_AS(EngineConfig::parse("zlib_level = 10"), UsageError);
}
