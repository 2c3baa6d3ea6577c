#include "rascache/cache_level.hpp"

#include <bit>
#include <stdexcept>

namespace rascache {

void CacheGeometry::validate() const {
  if (!is_pow2(num_sets)) throw std::invalid_argument("num_sets must be a power of two");
  if (!is_pow2(line_bytes)) throw std::invalid_argument("line_bytes must be a power of two");
  if (ways == 0) throw std::invalid_argument("ways must be >= 1");
  if (mshr_entries == 0) throw std::invalid_argument("mshr_entries must be >= 1");
  if (lfb_entries == 0) throw std::invalid_argument("lfb_entries must be >= 1");
  if (wb_entries == 0) throw std::invalid_argument("wb_entries must be >= 1");
}

CacheLevel::CacheLevel(std::string name, CacheGeometry geometry, ReplacementKind policy)
    : name_(std::move(name)), geo_(geometry), policy_(policy) {
  geo_.validate();
  offset_bits_ = static_cast<std::uint32_t>(std::countr_zero(geo_.line_bytes));
  tags_.resize(static_cast<std::size_t>(geo_.num_sets) * geo_.ways);
  for (std::uint32_t s = 0; s < geo_.num_sets; ++s)
    for (std::uint32_t w = 0; w < geo_.ways; ++w) entry(s, w).lru_rank = w;
  mshrs_.resize(geo_.mshr_entries);
  lfb_.reserve(geo_.lfb_entries);
}

std::uint32_t CacheLevel::set_index(Addr addr) const {
  return static_cast<std::uint32_t>((addr >> offset_bits_) & (geo_.num_sets - 1));
}

std::optional<std::uint32_t> CacheLevel::find_way(Addr line, std::uint32_t set) const {
  const Addr tag = line / geo_.way_size_bytes();
  for (std::uint32_t w = 0; w < geo_.ways; ++w) {
    const TagEntry& e = entry(set, w);
    if (e.valid && e.tag == tag) return w;
  }
  return std::nullopt;
}

void CacheLevel::touch(std::uint32_t set, std::uint32_t way) {
  if (policy_ != ReplacementKind::Lru) return;
  const std::uint32_t old = entry(set, way).lru_rank;
  for (std::uint32_t w = 0; w < geo_.ways; ++w) {
    TagEntry& e = entry(set, w);
    if (e.lru_rank < old) ++e.lru_rank;
  }
  entry(set, way).lru_rank = 0;
}

bool CacheLevel::contains(Addr addr) const {
  return find_way(line_addr(addr), set_index(addr)).has_value();
}

bool CacheLevel::is_dirty(Addr addr) const {
  auto way = find_way(line_addr(addr), set_index(addr));
  return way && entry(set_index(addr), *way).dirty;
}

std::optional<MshrId> CacheLevel::find_mshr(Addr addr) const {
  const Addr line = line_addr(addr);
  for (MshrId i = 0; i < mshrs_.size(); ++i)
    if (mshrs_[i].used && mshrs_[i].entry.line_addr == line) return i;
  return std::nullopt;
}

const MshrEntry* CacheLevel::mshr(MshrId id) const {
  if (id >= mshrs_.size() || !mshrs_[id].used) return nullptr;
  return &mshrs_[id].entry;
}

std::vector<Addr> CacheLevel::pending_lines() const {
  std::vector<Addr> out;
  for (const auto& s : mshrs_)
    if (s.used) out.push_back(s.entry.line_addr);
  return out;
}

std::optional<MshrId> CacheLevel::allocate(Addr line, bool no_fill, Cycle now,
                                           RequestOrigin origin) {
  for (MshrId i = 0; i < mshrs_.size(); ++i) {
    if (mshrs_[i].used) continue;
    Slot& s = mshrs_[i];
    s.used = true;
    s.entry = MshrEntry{};
    s.entry.line_addr = line;
    s.entry.no_fill = no_fill;
    s.entry.allocated_no_fill = no_fill;
    s.entry.issued_at = now;
    s.entry.origin = origin;
    ++mshrs_in_use_;
    return i;
  }
  return std::nullopt;
}

LookupResult CacheLevel::demand(Addr addr, bool no_fill, bool is_store, Cycle now,
                                RequestId requester, RequestOrigin origin) {
  const Addr line = line_addr(addr);
  const std::uint32_t set = set_index(addr);
  LookupResult r;
  // Prefetch traffic reaching a lower level is not a demand access.
  const bool counted = origin.kind == RequestKind::Load || origin.kind == RequestKind::Store;

  if (auto way = find_way(line, set)) {
    if (counted) {
      ++stats_.accesses;
      ++stats_.hits;
    }
    if (is_store) entry(set, *way).dirty = true;
    touch(set, *way);
    r.kind = LookupResult::Kind::Hit;
    r.latency = geo_.hit_latency;
    return r;
  }

  if (auto id = find_mshr(line)) {
    if (counted) {
      ++stats_.accesses;
      ++stats_.misses;
    }
    MshrEntry& m = mshrs_[*id].entry;
    m.targets.push_back(requester);
    if (is_store) m.store_merged = true;
    if (m.no_fill && !no_fill) {
      m.no_fill = false;
      m.cleared_by = counted ? ClearCause::NonSpecAccess : ClearCause::ShbFetch;
      m.cleared_at = now;
      r.cleared_no_fill = true;
    }
    r.kind = LookupResult::Kind::MissMerged;
    r.mshr = *id;
    return r;
  }

  auto id = allocate(line, no_fill, now, origin);
  if (!id) {
    ++stats_.blocked;
    r.kind = LookupResult::Kind::Blocked;
    return r;
  }
  if (counted) {
    ++stats_.accesses;
    ++stats_.misses;
  }
  MshrEntry& m = mshrs_[*id].entry;
  m.targets.push_back(requester);
  m.store_merged = is_store;
  r.kind = LookupResult::Kind::MissAllocated;
  r.mshr = *id;
  return r;
}

LookupResult CacheLevel::lookup(Addr addr, bool no_fill, Cycle now, RequestId requester,
                                RequestOrigin origin) {
  return demand(addr, no_fill, false, now, requester, origin);
}

LookupResult CacheLevel::write_store(Addr addr, bool no_fill, Cycle now, RequestId requester,
                                     RequestOrigin origin) {
  origin.kind = RequestKind::Store;
  return demand(addr, no_fill, true, now, requester, origin);
}

std::optional<MshrId> CacheLevel::allocate_fetch(Addr line, Cycle now, RequestOrigin origin) {
  return allocate(line_addr(line), false, now, origin);
}

std::uint32_t CacheLevel::select_victim(std::uint32_t set, Rng& rng) const {
  for (std::uint32_t w = 0; w < geo_.ways; ++w)
    if (!entry(set, w).valid) return w;
  if (policy_ == ReplacementKind::Lru) {
    for (std::uint32_t w = 0; w < geo_.ways; ++w)
      if (entry(set, w).lru_rank == geo_.ways - 1) return w;
    throw SimulationError("LRU ranks are not a permutation in " + name_);
  }
  return static_cast<std::uint32_t>(rng.rand_below(geo_.ways));
}

std::optional<WritebackEntry> CacheLevel::install(Addr line, bool dirty, Rng& rng,
                                                  std::optional<Addr>* evicted) {
  const std::uint32_t set = set_index(line);
  if (auto way = find_way(line, set)) {
    entry(set, *way).dirty = entry(set, *way).dirty || dirty;
    touch(set, *way);
    return std::nullopt;
  }
  const std::uint32_t way = select_victim(set, rng);
  TagEntry& e = entry(set, way);
  std::optional<WritebackEntry> wb;
  if (e.valid) {
    ++stats_.evictions;
    const Addr victim = (e.tag * geo_.num_sets + set) * geo_.line_bytes;
    if (evicted) *evicted = victim;
    if (e.dirty) {
      ++stats_.dirty_evictions;
      wb = WritebackEntry{victim, false};
    }
  }
  e.valid = true;
  e.dirty = dirty;
  e.tag = line / geo_.way_size_bytes();
  touch(set, way);
  return wb;
}

FillResult CacheLevel::complete_fill(MshrId id, Rng& rng, Cycle /*now*/) {
  if (id >= mshrs_.size() || !mshrs_[id].used)
    throw SimulationError("complete_fill on a free MSHR in " + name_);
  FillResult r;
  if (lfb_.size() >= geo_.lfb_entries) {
    r.kind = FillResult::Kind::Blocked;
    return r;
  }
  Slot& slot = mshrs_[id];
  const MshrEntry& m = slot.entry;
  lfb_.push_back(LfbEntry{m.line_addr, true, m.no_fill, m.store_merged});

  if (m.allocated_no_fill) {
    ++stats_.nofill.allocated;
    switch (m.cleared_by) {
      case ClearCause::None: ++stats_.nofill.never_cleared; break;
      case ClearCause::ShbFetch: ++stats_.nofill.cleared_by_shb_fetch; break;
      case ClearCause::NonSpecAccess: ++stats_.nofill.cleared_by_nonspec_access; break;
    }
  }

  const LfbEntry staged = lfb_.back();
  if (!staged.no_fill) {
    r.writeback = install(staged.line_addr, staged.store_merged, rng, &r.evicted_line);
    ++stats_.fills;
    r.kind = FillResult::Kind::Filled;
  } else {
    ++stats_.bypassed_fills;
    if (staged.store_merged) r.writeback = WritebackEntry{staged.line_addr, true};
    r.kind = FillResult::Kind::Bypassed;
  }
  lfb_.pop_back();

  r.entry = std::move(slot.entry);
  slot.used = false;
  slot.entry = MshrEntry{};
  --mshrs_in_use_;
  return r;
}

FlushResult CacheLevel::flush_line(Addr addr) {
  const Addr line = line_addr(addr);
  const std::uint32_t set = set_index(addr);
  FlushResult r;
  auto way = find_way(line, set);
  if (!way) {
    r.kind = FlushResult::Kind::NotPresent;
    r.latency = geo_.hit_latency;
    return r;
  }
  TagEntry& e = entry(set, *way);
  r.latency = geo_.hit_latency + 1;
  if (e.dirty) {
    r.kind = FlushResult::Kind::FlushedDirty;
    r.writeback = WritebackEntry{line, false};
  } else {
    r.kind = FlushResult::Kind::FlushedClean;
  }
  e.valid = false;
  e.dirty = false;
  return r;
}

ClearResult CacheLevel::apply_nofillclear(Addr line, Cycle now, ClearCause cause) {
  auto id = find_mshr(line);
  if (!id) return ClearResult::NoMatch;
  MshrEntry& m = mshrs_[*id].entry;
  if (m.no_fill) {
    m.no_fill = false;
    m.cleared_by = cause;
    m.cleared_at = now;
  }
  return ClearResult::Cleared;
}

WritebackAccept CacheLevel::accept_writeback(const WritebackEntry& wb, Rng& rng) {
  WritebackAccept r;
  const Addr line = line_addr(wb.line_addr);
  const std::uint32_t set = set_index(line);
  if (auto way = find_way(line, set)) {
    // Already resident: presence is unchanged, only the dirty bit moves.
    entry(set, *way).dirty = true;
    r.kind = WritebackAccept::Kind::Updated;
    return r;
  }
  if (wb.no_fill) {
    // Straight through the writeback buffer towards memory; the buffer drains
    // in the same cycle so it never holds more than this entry.
    ++stats_.writebacks_forwarded;
    r.kind = WritebackAccept::Kind::Forwarded;
    return r;
  }
  std::optional<Addr> evicted;
  r.evicted = install(line, true, rng, &evicted);
  ++stats_.writeback_allocations;
  r.kind = WritebackAccept::Kind::Allocated;
  return r;
}

void CacheLevel::invalidate_all() {
  for (auto& e : tags_) {
    e.valid = false;
    e.dirty = false;
  }
}

}  // namespace rascache
