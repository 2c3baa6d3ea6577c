#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "rascache/cache_level.hpp"

namespace rascache {

enum class FillProvenance : std::uint8_t {
  DemandAuthorized,         // load that was non-speculative or authorized by fill time
  Store,                    // fill-allowed store miss
  NonSpecMerge,             // NoFill cleared by a later non-speculative access
  ShbFetch,                 // SHB fetch allocation
  NoFillClearOnShb,         // NoFill cleared by a matching SHB fetch
  RandomFill,               // random-fill comparison fetch
  WritebackAlloc,           // L2 allocation for a fill-allowed writeback
  SpeculativeUnauthorized,  // speculative load still unauthorized at fill time
};
inline constexpr std::size_t kProvenanceCount = 8;

std::string_view to_string(FillProvenance p);

struct ShbStats {
  std::uint64_t ticks = 0;
  std::uint64_t emissions = 0;
  std::uint64_t empty_ticks = 0;
  std::uint64_t dropped_full_mshr = 0;
  std::uint64_t already_resident = 0;
  std::uint64_t merged_pending = 0;
  std::uint64_t issued = 0;
  std::uint64_t insertions = 0;
};

struct Metrics {
  LevelStats l1;
  LevelStats l2;
  ShbStats shb;
  std::uint64_t random_fill_fetches = 0;
  std::uint64_t writebacks_to_memory = 0;
  std::array<std::uint64_t, kProvenanceCount> fills_by_provenance{};
  Cycle cycles_total = 0;

  std::uint64_t fills(FillProvenance p) const {
    return fills_by_provenance[static_cast<std::size_t>(p)];
  }
};

struct NoFillSplitReport {
  double never_cleared = 0;
  double cleared_by_shb_fetch = 0;
  double cleared_by_nonspec_access = 0;
  std::uint64_t allocated = 0;
};

// Percentages (0..100) over all no-fill MSHR allocations at one level.
NoFillSplitReport split_percentages(const NoFillSplit& split);

}  // namespace rascache
