// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <set>

#include "doctest.h"
#include "kvlsm/error.hpp"
#include "kvlsm/keycodec.hpp"
#include "test_util.hpp"

using namespace kvlsm;

namespace {

// Big-endian reference encoding of a digest, independent of encode_key.
std::string be64(std::uint64_t v)
{
  std::string out(8, '\0');
  for (int i = 7; i >= 0; --i) {
    out[i] = static_cast<char>(v & 0xff);
    v >>= 8;
  }
  return out;
}

}  // namespace

TEST_CASE("fnv1a64 reference values")
{
  CHECK(fnv1a64({}) == 0xcbf29ce484222325ULL);
  // Digests produced by a standalone FNV-1a script before the build.
  const TokenId zero[] = {0};
  CHECK(block_digest(zero, 1).value == 0x4d25767f9dce13f5ULL);
  const TokenId one_two[] = {1, 2};
  CHECK(block_digest(one_two, 2).value == 0x9c191307aacacbfcULL);
}

TEST_CASE("block_digest rejects wrong block length")
{
  const TokenId t[] = {1, 2, 3};
  CHECK_THROWS_AS(block_digest(t, 2), UsageError);
}

TEST_CASE("chunk_tokens keeps full blocks only")
{
  std::vector<TokenId> tokens(130);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    tokens[i] = static_cast<TokenId>(i);
  }
  CHECK(chunk_tokens(TokenSpan(tokens).first(0), 64).empty());
  auto blocks = chunk_tokens(tokens, 64);
  REQUIRE(blocks.size() == 2);
  CHECK(blocks[0].front() == 0);
  CHECK(blocks[1].back() == 127);
  CHECK(chunk_tokens(TokenSpan(tokens).first(64), 64).size() == 1);
  CHECK_THROWS_AS(chunk_tokens(tokens, 0), UsageError);
}

TEST_CASE("encode_key layout")
{
  const BlockDigest d0{0x0102030405060708ULL};
  const BlockDigest d1{0xfffefdfcfbfaf9f8ULL};
  const BlockDigest one[] = {d0};
  const BlockDigest two[] = {d0, d1};
  CHECK(encode_key(one).bytes() == be64(d0.value));
  CHECK(encode_key(two).bytes() == be64(d0.value) + be64(d1.value));
  CHECK(encode_key(two).depth() == 2);
  CHECK(encode_key(two).truncated(1) == encode_key(one));
  CHECK_THROWS_AS(encode_key(std::span<const BlockDigest>{}), UsageError);
}

TEST_CASE("key_depth")
{
  CHECK(key_depth(std::string(8, 'a')) == 1);
  CHECK(key_depth(std::string(24, 'a')) == 3);
  CHECK_THROWS_AS(key_depth(std::string(9, 'a')), CorruptionError);
  CHECK_THROWS_AS(PrefixKey::from_bytes(std::string(9, 'a')), CorruptionError);
  CHECK_THROWS_AS(PrefixKey::from_bytes(""), CorruptionError);
}

TEST_CASE("chain_keys are nested byte prefixes")
{
  std::mt19937_64 rng(7);
  auto tokens = testing::random_tokens(rng, 64 * 5 + 3);
  auto keys = chain_keys(tokens, 64);
  REQUIRE(keys.size() == 5);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    CHECK(keys[i].depth() == i + 1);
    const std::string expect = be64(block_digest(TokenSpan(tokens).subspan(64 * i, 64), 64).value);
    CHECK(keys[i].bytes().substr(8 * i) == expect);
    if (i > 0) {
      CHECK(keys[i].bytes().compare(0, keys[i - 1].size(), keys[i - 1].bytes()) == 0);
    }
  }
}

TEST_CASE("property: chains diverging at block i share exactly 8*i key bytes")
{
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t depth = 1 + rng() % 8;
    const std::size_t diverge = rng() % depth;
    auto a = testing::random_tokens(rng, depth * 4);
    auto b = a;
    b[diverge * 4 + rng() % 4] ^= 1 + static_cast<TokenId>(rng() % 0xffff);
    const std::string ka = chain_keys(a, 4).back().bytes();
    const std::string kb = chain_keys(b, 4).back().bytes();
    auto mm = std::mismatch(ka.begin(), ka.end(), kb.begin());
    const auto shared = static_cast<std::size_t>(mm.first - ka.begin());
    // A digest pair could share leading bytes; screen those out.
    if (ka[8 * diverge] == kb[8 * diverge]) {
      continue;
    }
    CHECK(shared == 8 * diverge);
  }
}

TEST_CASE("determinism across calls")
{
  std::mt19937_64 rng(3);
  auto tokens = testing::random_tokens(rng, 256);
  CHECK(chain_keys(tokens, 64) == chain_keys(tokens, 64));
}
