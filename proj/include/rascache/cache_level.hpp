#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rascache/sim_kernel.hpp"
#include "rascache/types.hpp"

namespace rascache {

enum class ReplacementKind : std::uint8_t { Lru, Random };

struct CacheGeometry {
  std::uint32_t num_sets = 64;
  std::uint32_t ways = 8;
  std::uint32_t line_bytes = 64;
  std::uint32_t mshr_entries = 16;
  std::uint32_t lfb_entries = 8;
  std::uint32_t wb_entries = 8;
  Cycle hit_latency = 2;

  std::uint64_t way_size_bytes() const {
    return static_cast<std::uint64_t>(num_sets) * line_bytes;
  }
  std::uint64_t capacity_bytes() const { return way_size_bytes() * ways; }
  void validate() const;
};

struct TagEntry {
  bool valid = false;
  bool dirty = false;
  Addr tag = 0;
  std::uint32_t lru_rank = 0;  // 0 = most recently used

  bool operator==(const TagEntry&) const = default;
};

enum class RequestKind : std::uint8_t { Load, Store, ShbFetch, RandomFill };

// Who allocated an MSHR. op_seq ties demand requests back to the core's ROB.
struct RequestOrigin {
  RequestKind kind = RequestKind::Load;
  std::uint64_t op_seq = 0;
};

enum class ClearCause : std::uint8_t { None, ShbFetch, NonSpecAccess };

struct MshrEntry {
  Addr line_addr = 0;
  bool no_fill = false;
  bool allocated_no_fill = false;
  ClearCause cleared_by = ClearCause::None;
  Cycle cleared_at = 0;
  std::vector<RequestId> targets;
  Cycle issued_at = 0;
  bool store_merged = false;
  RequestOrigin origin;
};

struct LfbEntry {
  Addr line_addr = 0;
  bool data_present = false;
  bool no_fill = false;
  bool store_merged = false;
};

struct WritebackEntry {
  Addr line_addr = 0;
  bool no_fill = false;
};

struct LookupResult {
  enum class Kind : std::uint8_t { Hit, MissAllocated, MissMerged, Blocked };
  Kind kind = Kind::Blocked;
  Cycle latency = 0;
  MshrId mshr = 0;
  bool cleared_no_fill = false;  // a fill-allowed merge cleared a NoFill bit
};

struct FillResult {
  enum class Kind : std::uint8_t { Filled, Bypassed, Blocked };
  Kind kind = Kind::Blocked;
  std::optional<Addr> evicted_line;
  std::optional<WritebackEntry> writeback;
  MshrEntry entry;  // the freed MSHR (targets, origin, clear history)
};

struct FlushResult {
  enum class Kind : std::uint8_t { FlushedClean, FlushedDirty, NotPresent };
  Kind kind = Kind::NotPresent;
  Cycle latency = 0;
  std::optional<WritebackEntry> writeback;
};

enum class ClearResult : std::uint8_t { Cleared, NoMatch };

struct WritebackAccept {
  enum class Kind : std::uint8_t { Updated, Allocated, Forwarded };
  Kind kind = Kind::Forwarded;
  std::optional<WritebackEntry> evicted;  // dirty victim pushed further down
};

struct NoFillSplit {
  std::uint64_t allocated = 0;
  std::uint64_t never_cleared = 0;
  std::uint64_t cleared_by_shb_fetch = 0;
  std::uint64_t cleared_by_nonspec_access = 0;
};

struct LevelStats {
  std::uint64_t accesses = 0;  // demand lookups (loads + stores), excluding Blocked retries
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t fills = 0;
  std::uint64_t bypassed_fills = 0;
  std::uint64_t evictions = 0;
  std::uint64_t dirty_evictions = 0;
  std::uint64_t blocked = 0;
  std::uint64_t writebacks_forwarded = 0;
  std::uint64_t writeback_allocations = 0;
  NoFillSplit nofill;

  double miss_rate() const {
    return accesses == 0 ? 0.0 : static_cast<double>(misses) / static_cast<double>(accesses);
  }
};

// One set-associative level: tag store, replacement state, MSHRs, line-fill
// buffer and writeback buffer. Holds metadata only, no data payloads.
class CacheLevel {
 public:
  CacheLevel(std::string name, CacheGeometry geometry, ReplacementKind policy);

  const std::string& name() const { return name_; }
  const CacheGeometry& geometry() const { return geo_; }
  ReplacementKind policy() const { return policy_; }

  std::uint32_t set_index(Addr addr) const;
  Addr line_addr(Addr addr) const { return line_of(addr, geo_.line_bytes); }

  // Demand load lookup. Blocked means every MSHR is busy; retry next cycle.
  LookupResult lookup(Addr addr, bool no_fill, Cycle now, RequestId requester = 0,
                      RequestOrigin origin = {});

  // Demand store. Hits dirty the line; misses allocate an MSHR flagged as
  // carrying store data.
  LookupResult write_store(Addr addr, bool no_fill, Cycle now, RequestId requester = 0,
                           RequestOrigin origin = {});

  // Fill-allowed prefetch allocation (SHB / random-fill fetch). Caller has
  // already checked residency and pending MSHRs. nullopt when MSHRs are full.
  std::optional<MshrId> allocate_fetch(Addr line, Cycle now, RequestOrigin origin);

  // Victim way for `set`: invalid ways first (lowest index), else LRU / random.
  std::uint32_t select_victim(std::uint32_t set, Rng& rng) const;

  // Line data for `mshr` has arrived: stage it in the LFB and either install
  // it (NoFill clear) or forward it without touching tags (NoFill set).
  FillResult complete_fill(MshrId mshr, Rng& rng, Cycle now);

  FlushResult flush_line(Addr addr);

  // Clears the NoFill bit of a pending MSHR for `line`. Never touches tags.
  ClearResult apply_nofillclear(Addr line, Cycle now, ClearCause cause = ClearCause::ShbFetch);

  // Writeback arriving from the level above.
  WritebackAccept accept_writeback(const WritebackEntry& wb, Rng& rng);

  bool contains(Addr addr) const;
  bool is_dirty(Addr addr) const;
  std::optional<MshrId> find_mshr(Addr addr) const;
  const MshrEntry* mshr(MshrId id) const;
  std::uint32_t mshrs_in_use() const { return mshrs_in_use_; }
  std::uint32_t lfb_in_use() const { return static_cast<std::uint32_t>(lfb_.size()); }

  // Metadata snapshots for state-equality checks.
  const std::vector<TagEntry>& tags() const { return tags_; }
  std::vector<Addr> pending_lines() const;

  const LevelStats& stats() const { return stats_; }
  void reset_stats() { stats_ = {}; }

  // Full invalidate (tags, MSHRs untouched) for test setup.
  void invalidate_all();

 private:
  struct Slot {
    bool used = false;
    MshrEntry entry;
  };

  std::optional<std::uint32_t> find_way(Addr line, std::uint32_t set) const;
  void touch(std::uint32_t set, std::uint32_t way);
  LookupResult demand(Addr addr, bool no_fill, bool is_store, Cycle now, RequestId requester,
                      RequestOrigin origin);
  std::optional<MshrId> allocate(Addr line, bool no_fill, Cycle now, RequestOrigin origin);
  TagEntry& entry(std::uint32_t set, std::uint32_t way) { return tags_[set * geo_.ways + way]; }
  const TagEntry& entry(std::uint32_t set, std::uint32_t way) const {
    return tags_[set * geo_.ways + way];
  }
  // Installs `line` into its set, returning the dirty victim if any.
  std::optional<WritebackEntry> install(Addr line, bool dirty, Rng& rng,
                                        std::optional<Addr>* evicted);

  std::string name_;
  CacheGeometry geo_;
  ReplacementKind policy_;
  std::uint32_t offset_bits_ = 0;
  std::vector<TagEntry> tags_;
  std::vector<Slot> mshrs_;
  std::uint32_t mshrs_in_use_ = 0;
  std::vector<LfbEntry> lfb_;
  LevelStats stats_;
};

}  // namespace rascache
