// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <exception>
#include <map>
#include <mutex>
#include <string>
#include <string_view>

namespace kvlsm {

/// Thrown at an armed kill point. Deliberately not a kvlsm::Error so no
/// error-handling path in the library can swallow it: the object that was
/// executing must be abandoned and the directory reopened, as after a kill.
class CrashInjected : public std::exception {
 public:
  explicit CrashInjected(std::string point) : point_(std::move(point)) {}
  const char* what() const noexcept override { return point_.c_str(); }
  const std::string& point() const noexcept { return point_; }

 private:
  std::string point_;
};

/// Named kill points threaded through every phase boundary of the write,
/// flush, compaction and merge paths. Tests arm one point with a countdown;
/// production code passes a null injector.
class FaultInjector {
 public:
  enum class Mode { kCrash, kIoError };

  /// Fire on the `countdown`-th hit of `point` (1 = next hit).
  void arm(std::string point, int countdown = 1, Mode mode = Mode::kCrash);
  void disarm();

  /// True (once) when the armed point fires. Callers that emulate torn
  /// writes use this, write a partial record, then call `raise`.
  bool fires(std::string_view point);

  /// Throw for an armed point that fired.
  [[noreturn]] void raise(std::string_view point) const;

  /// fires() + raise() in one step.
  void hit(std::string_view point);

  bool triggered() const;
  std::map<std::string, int> hit_counts() const;

 private:
  mutable std::mutex mu_;
  std::string armed_;
  int countdown_ = 0;
  Mode mode_ = Mode::kCrash;
  bool triggered_ = false;
  std::map<std::string, int, std::less<>> hits_;
};

inline void fault_point(FaultInjector* f, std::string_view point)
{
  if (f != nullptr) {
    f->hit(point);
  }
}

inline bool fault_fires(FaultInjector* f, std::string_view point)
{
  return f != nullptr && f->fires(point);
}

}  // namespace kvlsm
