#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "rascache/sim_kernel.hpp"
#include "rascache/types.hpp"

namespace rascache {

struct ShbEmission {
  Cycle cycle = 0;
  Addr selected_entry = 0;
  Addr fetch_addr = 0;
};

// Safe History Buffer: FIFO of authorized byte addresses. Each tick picks
// one entry uniformly and returns a random line from its W-line window.
class SafeHistoryBuffer {
 public:
  SafeHistoryBuffer(std::uint32_t entries, std::uint32_t rate_cycles, std::uint32_t window_lines,
                    std::uint32_t line_bytes, std::uint64_t seed);

  void insert(Addr addr);
  std::optional<Addr> select_fetch_address();
  // Called every cycle with now % R == 0. nullopt when the buffer is empty.
  std::optional<ShbEmission> tick(Cycle now);

  bool due(Cycle now) const { return now % rate_ == 0; }
  std::size_t size() const { return entries_.size(); }
  std::vector<Addr> entries() const { return {entries_.begin(), entries_.end()}; }
  std::uint32_t capacity() const { return capacity_; }
  std::uint32_t rate_cycles() const { return rate_; }
  std::uint32_t window_lines() const { return window_; }

  std::uint64_t emissions() const { return emissions_; }
  std::uint64_t empty_ticks() const { return empty_ticks_; }
  std::uint64_t insertions() const { return insertions_; }

 private:
  std::uint32_t capacity_;
  std::uint32_t rate_;
  std::uint32_t window_;
  std::uint32_t line_bytes_;
  std::deque<Addr> entries_;
  Rng entry_rng_;
  Rng window_rng_;
  Addr last_entry_ = 0;
  std::uint64_t emissions_ = 0;
  std::uint64_t empty_ticks_ = 0;
  std::uint64_t insertions_ = 0;
};

}  // namespace rascache
