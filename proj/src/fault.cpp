// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvlsm/fault.hpp"

#include "kvlsm/error.hpp"

namespace kvlsm {

void FaultInjector::arm(std::string point, int countdown, Mode mode)
{
  std::lock_guard lock(mu_);
  armed_ = std::move(point);
  countdown_ = countdown;
  mode_ = mode;
  triggered_ = false;
}

void FaultInjector::disarm()
{
  std::lock_guard lock(mu_);
  armed_.clear();
  countdown_ = 0;
}

bool FaultInjector::fires(std::string_view point)
{
  std::lock_guard lock(mu_);
  ++hits_[std::string(point)];
  if (countdown_ <= 0 || point != armed_) {
    return false;
  }
  if (--countdown_ > 0) {
    return false;
  }
  triggered_ = true;
  return true;
}

void FaultInjector::raise(std::string_view point) const
{
  Mode mode;
  {
    std::lock_guard lock(mu_);
    mode = mode_;
  }
  if (mode == Mode::kIoError) {
    throw IoError("injected I/O failure at " + std::string(point));
  }
  throw CrashInjected(std::string(point));
}

void FaultInjector::hit(std::string_view point)
{
  if (fires(point)) {
    raise(point);
  }
}

bool FaultInjector::triggered() const
{
  std::lock_guard lock(mu_);
  return triggered_;
}

std::map<std::string, int> FaultInjector::hit_counts() const
{
  std::lock_guard lock(mu_);
  return {hits_.begin(), hits_.end()};
}

}  // namespace kvlsm
