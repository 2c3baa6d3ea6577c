#pragma once

#include <cstdint>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "rascache/types.hpp"

namespace rascache {

// SplitMix64. Bit-exact across platforms so experiments replay identically.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, n) by rejection: draws >= floor(2^64 / n) * n are redrawn.
  std::uint64_t rand_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("rand_below: n must be >= 1");
    // 2^64 mod n; draws at or above 2^64 - rem are rejected.
    const std::uint64_t rem = (0 - n) % n;
    for (;;) {
      const std::uint64_t x = next();
      if (rem == 0 || x < 0 - rem) return x % n;
    }
  }

  // Uniform double in [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

// Per-subsystem stream constants; each subsystem owns Rng(seed ^ constant).
namespace stream {
inline constexpr std::uint64_t kReplacement = 0x01;
inline constexpr std::uint64_t kShbEntry = 0x02;
inline constexpr std::uint64_t kShbWindow = 0x03;
inline constexpr std::uint64_t kWorkload = 0x04;
}  // namespace stream

template <typename Payload>
struct ScheduledEvent {
  Cycle fire_at = 0;
  std::uint64_t sequence = 0;
  Payload payload{};
};

// Discrete-event queue with its own clock. Ties on fire_at resolve in
// insertion order.
template <typename Payload>
class EventQueue {
 public:
  Cycle now() const { return now_; }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }

  void schedule(Cycle fire_at, Payload payload) {
    if (fire_at < now_) {
      throw SimulationError("event scheduled in the past (fire_at=" +
                            std::to_string(fire_at) +
                            ", now=" + std::to_string(now_) + ")");
    }
    heap_.push(ScheduledEvent<Payload>{fire_at, next_sequence_++, std::move(payload)});
  }

  void schedule_in(Cycle delay, Payload payload) { schedule(now_ + delay, std::move(payload)); }

  std::optional<Cycle> next_time() const {
    if (heap_.empty()) return std::nullopt;
    return heap_.top().fire_at;
  }

  // Jump the clock forward over an empty stretch. Skipping a pending event is
  // a simulation bug.
  void advance_to(Cycle t) {
    if (t < now_) throw SimulationError("advance_to moves the clock backwards");
    if (!heap_.empty() && heap_.top().fire_at < t)
      throw SimulationError("advance_to would skip a pending event");
    now_ = t;
  }

  // Advance to the next event time (or by one cycle when idle) and fire
  // everything due at that cycle. Handlers may schedule at the current cycle;
  // those fire within the same call.
  template <typename Handler>
  void step(Handler&& handler) {
    if (heap_.empty()) {
      ++now_;
      return;
    }
    now_ = heap_.top().fire_at;
    while (!heap_.empty() && heap_.top().fire_at == now_) {
      ScheduledEvent<Payload> ev = heap_.top();
      heap_.pop();
      handler(ev);
    }
  }

  std::vector<ScheduledEvent<Payload>> step() {
    std::vector<ScheduledEvent<Payload>> fired;
    step([&](const ScheduledEvent<Payload>& ev) { fired.push_back(ev); });
    return fired;
  }

 private:
  struct Later {
    bool operator()(const ScheduledEvent<Payload>& a, const ScheduledEvent<Payload>& b) const {
      if (a.fire_at != b.fire_at) return a.fire_at > b.fire_at;
      return a.sequence > b.sequence;
    }
  };

  Cycle now_ = 0;
  std::uint64_t next_sequence_ = 0;
  std::priority_queue<ScheduledEvent<Payload>, std::vector<ScheduledEvent<Payload>>, Later> heap_;
};

}  // namespace rascache
