// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "kvlsm/bytes.hpp"

namespace kvlsm::util {

namespace fs = std::filesystem;

/// Owning POSIX file descriptor. Errors surface as IoError carrying the path.
class File {
 public:
  File() = default;
  ~File();

  File(File&& other) noexcept;
  File& operator=(File&& other) noexcept;
  File(const File&) = delete;
  File& operator=(const File&) = delete;

  static File open_read(const fs::path& path);
  /// Read/write, created if missing, existing contents kept.
  static File open_rw(const fs::path& path);
  /// Read/write, truncated to zero length.
  static File create(const fs::path& path);

  bool is_open() const noexcept { return fd_ >= 0; }
  int fd() const noexcept { return fd_; }
  const fs::path& path() const noexcept { return path_; }

  void pwrite_all(ByteView data, std::uint64_t offset);
  /// Reads exactly `n` bytes or throws. A short read means the file is
  /// shorter than the persisted metadata says, i.e. corruption.
  void pread_exact(std::uint8_t* dst, std::size_t n, std::uint64_t offset) const;
  /// Reads up to `n` bytes, returns how many were read.
  std::size_t pread_some(std::uint8_t* dst, std::size_t n, std::uint64_t offset) const;
  void sync();
  std::uint64_t size() const;
  void truncate(std::uint64_t length);
  void close();

 private:
  File(int fd, fs::path path) : fd_(fd), path_(std::move(path)) {}

  int fd_ = -1;
  fs::path path_;
};

void sync_dir(const fs::path& dir);

Bytes read_file(const fs::path& path);

/// Write + fsync a whole file in one step (truncating any previous content).
void write_file_synced(const fs::path& path, ByteView data);

}  // namespace kvlsm::util
