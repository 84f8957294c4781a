// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvlsm/baseline_fpo.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>

#include "kvlsm/error.hpp"

namespace kvlsm {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t elapsed_ns(Clock::time_point start)
{
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count());
}

[[noreturn]] void throw_errno(const std::string& what, const fs::path& path)
{
  throw IoError(what + " " + path.string() + ": " + std::strerror(errno));
}

}  // namespace

std::string fpo_file_name(const PrefixKey& key)
{
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx.kv",
                static_cast<unsigned long long>(fnv1a64(as_bytes(key.bytes()))));
  return buf;
}

FpoBackend::FpoBackend(fs::path dir, FpoOptions options)
    : dir_(std::move(dir)), options_(options)
{
}

std::unique_ptr<FpoBackend> FpoBackend::open(const fs::path& dir, FpoOptions options)
{
  if (options.block_tokens == 0) {
    throw UsageError("block_tokens must be positive");
  }
  fs::create_directories(dir);
  return std::unique_ptr<FpoBackend>(new FpoBackend(dir, options));
}

bool FpoBackend::exists(const PrefixKey& key) const
{
  struct stat st {};
  ++syscalls_;
  const fs::path p = dir_ / fpo_file_name(key);
  if (::stat(p.c_str(), &st) == 0) {
    return true;
  }
  if (errno != ENOENT) {
    throw_errno("stat", p);
  }
  return false;
}

std::size_t FpoBackend::put_batch(TokenSpan tokens, std::span<const ByteView> tensors)
{
  const auto start = Clock::now();
  const std::vector<PrefixKey> keys = chain_keys(tokens, options_.block_tokens);
  if (tensors.size() != keys.size()) {
    throw UsageError("put_batch: " + std::to_string(tensors.size()) + " tensors for " +
                     std::to_string(keys.size()) + " full blocks");
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].empty()) {
      throw UsageError("put_batch: tensor for block " + std::to_string(i) + " is empty");
    }
  }

  std::lock_guard lock(write_mu_);
  std::uint64_t stored = 0;
  std::uint64_t bytes = 0;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (exists(keys[i])) {
      continue;
    }
    const ByteView one[] = {tensors[i]};
    const EncodedBatch enc = encode_batch(one, options_.codec, options_.zlib_level);
    const fs::path p = dir_ / fpo_file_name(keys[i]);
    // Write under a temporary name so a file that exists is always complete.
    const fs::path tmp = p.string() + ".tmp";
    ++syscalls_;
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) {
      throw_errno("open", tmp);
    }
    std::size_t done = 0;
    while (done < enc.bytes.size()) {
      ++syscalls_;
      const ssize_t n = ::write(fd, enc.bytes.data() + done, enc.bytes.size() - done);
      if (n < 0) {
        if (errno == EINTR) {
          continue;
        }
        const int saved = errno;
        ::close(fd);
        errno = saved;
        throw_errno("write", tmp);
      }
      done += static_cast<std::size_t>(n);
    }
    ++syscalls_;
    ::close(fd);
    ++syscalls_;
    if (::rename(tmp.c_str(), p.c_str()) != 0) {
      throw_errno("rename", p);
    }
    ++stored;
    bytes += enc.bytes.size();
  }

  OpStats delta;
  delta.writes = stored;
  delta.put_calls = 1;
  delta.bytes_written = bytes;
  delta.put_ns = elapsed_ns(start);
  totals_.add(delta);
  return stored;
}

ProbeResult FpoBackend::probe(TokenSpan tokens)
{
  const auto start = Clock::now();
  const std::vector<PrefixKey> keys = chain_keys(tokens, options_.block_tokens);
  std::size_t lo = 0;
  std::size_t hi = keys.size();
  std::uint64_t lookups = 0;
  std::uint64_t present = 0;
  while (lo < hi) {
    const std::size_t mid = (lo + hi + 1) / 2;
    ++lookups;
    if (exists(keys[mid - 1])) {
      ++present;
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  OpStats delta;
  delta.probe_calls = 1;
  delta.point_lookups = lookups;
  if (lo == 0) {
    delta.zero_result_probes = 1;
  } else {
    delta.succeeded_point_reads = present;
  }
  delta.probe_ns = elapsed_ns(start);
  totals_.add(delta);
  return ProbeResult{lo, lo * options_.block_tokens};
}

std::vector<Bytes> FpoBackend::get_batch(TokenSpan tokens, std::size_t upto_blocks)
{
  if (upto_blocks == 0) {
    return {};
  }
  const auto start = Clock::now();
  const std::vector<PrefixKey> keys = chain_keys(tokens, options_.block_tokens);
  if (upto_blocks > keys.size()) {
    throw UsageError("get_batch: " + std::to_string(upto_blocks) + " blocks requested but tokens " +
                     "hold only " + std::to_string(keys.size()));
  }
  std::vector<Bytes> out;
  out.reserve(upto_blocks);
  std::uint64_t bytes = 0;
  for (std::size_t i = 0; i < upto_blocks; ++i) {
    const fs::path p = dir_ / fpo_file_name(keys[i]);
    ++syscalls_;
    const int fd = ::open(p.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd < 0) {
      if (errno == ENOENT) {
        throw UsageError("get_batch: block " + std::to_string(i + 1) + " of " +
                         std::to_string(upto_blocks) + " is not stored");
      }
      throw_errno("open", p);
    }
    Bytes stored;
    std::uint8_t buf[1 << 16];
    for (;;) {
      ++syscalls_;
      const ssize_t n = ::read(fd, buf, sizeof(buf));
      if (n < 0) {
        if (errno == EINTR) {
          continue;
        }
        const int saved = errno;
        ::close(fd);
        errno = saved;
        throw_errno("read", p);
      }
      if (n == 0) {
        break;
      }
      stored.insert(stored.end(), buf, buf + n);
    }
    ++syscalls_;
    ::close(fd);
    std::vector<Bytes> items = decode_batch(stored, options_.codec);
    if (items.size() != 1) {
      throw CorruptionError(p.string() + ": expected one payload, found " +
                            std::to_string(items.size()));
    }
    bytes += items[0].size();
    out.push_back(std::move(items[0]));
  }

  OpStats delta;
  delta.get_calls = 1;
  delta.range_scans = 1;
  delta.blocks_read = upto_blocks;
  delta.bytes_read = bytes;
  delta.get_ns = elapsed_ns(start);
  totals_.add(delta);
  return out;
}

OpStats FpoBackend::snapshot_stats() const
{
  std::lock_guard lock(window_mu_);
  return totals_.load() - window_base_;
}

OpStats FpoBackend::reset_window()
{
  std::lock_guard lock(window_mu_);
  const OpStats now = totals_.load();
  const OpStats window = now - window_base_;
  window_base_ = now;
  return window;
}

std::size_t FpoBackend::file_count() const
{
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir_)) {
    n += e.is_regular_file() ? 1 : 0;
  }
  return n;
}

std::uint64_t FpoBackend::disk_bytes() const
{
  std::uint64_t n = 0;
  for (const auto& e : fs::directory_iterator(dir_)) {
    if (e.is_regular_file()) {
      n += e.file_size();
    }
  }
  return n;
}

}  // namespace kvlsm
