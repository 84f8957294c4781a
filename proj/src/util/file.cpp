// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#include "util/file.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace kvlsm::util {

namespace {

[[noreturn]] void throw_errno(const std::string& op, const fs::path& path)
{
  throw IoError(op + " " + path.string() + ": " + std::strerror(errno));
}

int open_or_throw(const fs::path& path, int flags)
{
  int fd;
  do {
    fd = ::open(path.c_str(), flags | O_CLOEXEC, 0644);
  } while (fd < 0 && errno == EINTR);
  if (fd < 0) {
    throw_errno("open", path);
  }
  return fd;
}

}  // namespace

File::~File()
{
  if (fd_ >= 0) {
    ::close(fd_);
  }
}

File::File(File&& other) noexcept : fd_(other.fd_), path_(std::move(other.path_))
{
  other.fd_ = -1;
}

File& File::operator=(File&& other) noexcept
{
  if (this != &other) {
    if (fd_ >= 0) {
      ::close(fd_);
    }
    fd_ = other.fd_;
    path_ = std::move(other.path_);
    other.fd_ = -1;
  }
  return *this;
}

File File::open_read(const fs::path& path)
{
  return File(open_or_throw(path, O_RDONLY), path);
}

File File::open_rw(const fs::path& path)
{
  return File(open_or_throw(path, O_RDWR | O_CREAT), path);
}

File File::create(const fs::path& path)
{
  return File(open_or_throw(path, O_RDWR | O_CREAT | O_TRUNC), path);
}

void File::pwrite_all(ByteView data, std::uint64_t offset)
{
  const std::uint8_t* p = data.data();
  std::size_t left = data.size();
  while (left > 0) {
    ssize_t n = ::pwrite(fd_, p, left, static_cast<off_t>(offset));
    if (n < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw_errno("pwrite", path_);
    }
    p += n;
    left -= static_cast<std::size_t>(n);
    offset += static_cast<std::uint64_t>(n);
  }
}

std::size_t File::pread_some(std::uint8_t* dst, std::size_t n, std::uint64_t offset) const
{
  std::size_t done = 0;
  while (done < n) {
    ssize_t r = ::pread(fd_, dst + done, n - done, static_cast<off_t>(offset + done));
    if (r < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw_errno("pread", path_);
    }
    if (r == 0) {
      break;
    }
    done += static_cast<std::size_t>(r);
  }
  return done;
}

void File::pread_exact(std::uint8_t* dst, std::size_t n, std::uint64_t offset) const
{
  if (pread_some(dst, n, offset) != n) {
    throw CorruptionError("short read from " + path_.string() + " at offset " +
                          std::to_string(offset) + " (" + std::to_string(n) + " bytes)");
  }
}

void File::sync()
{
  if (::fdatasync(fd_) != 0) {
    throw_errno("fdatasync", path_);
  }
}

std::uint64_t File::size() const
{
  struct stat st {};
  if (::fstat(fd_, &st) != 0) {
    throw_errno("fstat", path_);
  }
  return static_cast<std::uint64_t>(st.st_size);
}

void File::truncate(std::uint64_t length)
{
  if (::ftruncate(fd_, static_cast<off_t>(length)) != 0) {
    throw_errno("ftruncate", path_);
  }
}

void File::close()
{
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void sync_dir(const fs::path& dir)
{
  int fd = open_or_throw(dir, O_RDONLY | O_DIRECTORY);
  int rc = ::fsync(fd);
  ::close(fd);
  if (rc != 0) {
    throw_errno("fsync", dir);
  }
}

Bytes read_file(const fs::path& path)
{
  File f = File::open_read(path);
  Bytes out(f.size());
  f.pread_exact(out.data(), out.size(), 0);
  return out;
}

void write_file_synced(const fs::path& path, ByteView data)
{
  File f = File::create(path);
  f.pwrite_all(data, 0);
  f.sync();
}

}  // namespace kvlsm::util
