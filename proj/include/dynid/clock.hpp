#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>

#include "dynid/digest.hpp"

namespace dynid {

/// Abstract time source. The daemon and clients take one by reference so
/// tests can script time; production code passes SystemClock.
struct Clock {
  virtual ~Clock() = default;
  virtual Timestamp now() = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() override {
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(
        std::chrono::system_clock::now().time_since_epoch());
    return Timestamp{static_cast<std::uint64_t>(secs.count())};
  }

  static SystemClock& instance() {
    static SystemClock clock;
    return clock;
  }
};

/// Fully scripted clock for tests: time moves only when told to.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(Timestamp start = Timestamp{0})
      : seconds_(start.seconds) {}

  Timestamp now() override { return Timestamp{seconds_.load()}; }

  void set(Timestamp t) { seconds_.store(t.seconds); }

  void advance(std::uint64_t by_seconds) { seconds_ += by_seconds; }

 private:
  std::atomic<std::uint64_t> seconds_;
};

}  // namespace dynid
