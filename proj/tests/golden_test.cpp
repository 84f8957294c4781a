// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

// Byte layouts compared against fixtures written by golden/make_golden.py.

#include <cstdlib>
#include <fstream>

#include "doctest.h"
#include "kvlsm/crc32c.hpp"
#include "kvlsm/lsm_index.hpp"
#include "kvlsm/tensor_log.hpp"
#include "lsm/run.hpp"
#include "lsm/wal.hpp"
#include "test_util.hpp"

using namespace kvlsm;

namespace {

std::filesystem::path golden_dir()
{
  const char* env = std::getenv("KVLSM_GOLDEN_DIR");
  return env != nullptr ? std::filesystem::path(env)
                        : std::filesystem::path(__FILE__).parent_path() / "golden";
}

Bytes load(const std::string& name)
{
  std::ifstream in(golden_dir() / name, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "missing fixture " << name);
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

Bytes slurp(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

const std::string kKeyA("\x01\x02\x03\x04\x05\x06\x07\x08", 8);
const std::string kKeyB = kKeyA + std::string("\xff\xfe\xfd\xfc\xfb\xfa\xf9\xf8", 8);
const std::string kKeyC(8, '\x80');
const IndexEntry kEntryA{1, 4096, 300, 1, 0xdeadbeef};
const IndexEntry kEntryB{2, 0, 77, 0, 0x12345678};
const IndexEntry kEntryC{3, 1ull << 33, 65536, 1, 0x0badf00d};

}  // namespace

TEST_CASE("crc32c check value")
{
  CHECK(crc32c(as_bytes("123456789")) == 0xe3069283u);
}

TEST_CASE("WAL record layout")
{
  const IndexPair pairs[] = {{PrefixKey::from_bytes(kKeyA), kEntryA},
                             {PrefixKey::from_bytes(kKeyB), kEntryB}};
  CHECK(lsm::encode_wal_record(7, pairs) == load("wal_record.bin"));

  // The WAL file is a plain concatenation of records.
  testing::TempDir dir;
  {
    auto wal = lsm::Wal::open(dir / "wal.log", nullptr, [](lsm::WalBatch&&) {});
    wal->append(7, pairs);
  }
  CHECK(slurp(dir / "wal.log") == load("wal_record.bin"));
}

TEST_CASE("LogRecord layout")
{
  const std::string payload("kv-cache-block\x00\x01\x02", 17);
  CHECK(encode_log_record(PrefixKey::from_bytes(kKeyB), as_bytes(payload), CodecId::kZlib, 1234) ==
        load("log_record.bin"));
}

TEST_CASE("run footer layout")
{
  lsm::RunFooter f;
  f.entry_count = 1000;
  f.block_count = 17;
  f.fence_offset = 69632;
  f.fence_length = 900;
  f.bloom_offset = 70532;
  f.bloom_length = 1254;
  f.meta_crc32c = 0xcafebabe;
  const Bytes golden = load("run_footer.bin");
  CHECK(f.encode() == golden);
  auto back = lsm::RunFooter::decode(golden, "golden");
  CHECK(back.bloom_length == 1254);
  CHECK(back.fence_offset == 69632);
}

TEST_CASE("whole run file layout")
{
  testing::TempDir dir;
  {
    lsm::RunBuilder b(dir / "run.sst", 10);
    b.add(kKeyA, kEntryA);
    b.add(kKeyB, kEntryB);
    b.add(kKeyC, kEntryC);
    b.finish(1);
  }
  CHECK(slurp(dir / "run.sst") == load("run_small.sst"));
}
