#include "rascache/hierarchy.hpp"

#include <stdexcept>
#include <variant>

namespace rascache {

std::string_view to_string(DefenseKind k) {
  switch (k) {
    case DefenseKind::BaselineLru: return "baseline-lru";
    case DefenseKind::SaRandomRepl: return "sa-rr";
    case DefenseKind::RasSpec: return "ras-spec";
    case DefenseKind::RasPlus: return "ras-plus";
    case DefenseKind::RandomFill: return "random-fill";
  }
  return "?";
}

std::optional<DefenseKind> parse_defense_kind(std::string_view s) {
  for (auto k : {DefenseKind::BaselineLru, DefenseKind::SaRandomRepl, DefenseKind::RasSpec,
                 DefenseKind::RasPlus, DefenseKind::RandomFill})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

std::string_view to_string(FillProvenance p) {
  switch (p) {
    case FillProvenance::DemandAuthorized: return "demand";
    case FillProvenance::Store: return "store";
    case FillProvenance::NonSpecMerge: return "nonspec-merge";
    case FillProvenance::ShbFetch: return "shb-fetch";
    case FillProvenance::NoFillClearOnShb: return "nofillclear-shb";
    case FillProvenance::RandomFill: return "random-fill";
    case FillProvenance::WritebackAlloc: return "writeback";
    case FillProvenance::SpeculativeUnauthorized: return "spec-unauthorized";
  }
  return "?";
}

NoFillSplitReport split_percentages(const NoFillSplit& s) {
  NoFillSplitReport r;
  r.allocated = s.allocated;
  if (s.allocated == 0) return r;
  const double n = static_cast<double>(s.allocated);
  r.never_cleared = 100.0 * static_cast<double>(s.never_cleared) / n;
  r.cleared_by_shb_fetch = 100.0 * static_cast<double>(s.cleared_by_shb_fetch) / n;
  r.cleared_by_nonspec_access = 100.0 * static_cast<double>(s.cleared_by_nonspec_access) / n;
  return r;
}

void DefenseMode::validate() const {
  if (uses_shb()) {
    if (rate_cycles < 1) throw std::invalid_argument("rate must be >= 1");
    if (shb_entries < 1) throw std::invalid_argument("entries must be >= 1");
  }
  if (uses_window() && !is_pow2(window_lines))
    throw std::invalid_argument("window must be a power of two >= 1");
}

std::string DefenseMode::label() const {
  std::string s(to_string(kind));
  if (uses_shb()) {
    s += "-R" + std::to_string(rate_cycles) + "E" + std::to_string(shb_entries) + "W" +
         std::to_string(window_lines);
    if (!nofillclear) s += "-nonfc";
  } else if (kind == DefenseKind::RandomFill) {
    s += "-W" + std::to_string(window_lines);
  }
  return s;
}

void HierarchyConfig::validate() const {
  l1.validate();
  l2.validate();
  if (l1.line_bytes != l2.line_bytes)
    throw std::invalid_argument("l1 and l2 line_bytes must match");
}

Hierarchy::Hierarchy(HierarchyConfig config, DefenseMode defense, std::uint64_t seed,
                     Kernel& kernel)
    : cfg_(config),
      defense_(defense),
      kernel_(kernel),
      l1_("L1D", config.l1, defense.replacement()),
      l2_("L2", config.l2, defense.replacement()),
      repl_rng_(seed ^ stream::kReplacement),
      window_rng_(seed ^ stream::kShbWindow) {
  cfg_.validate();
  defense_.validate();
  l1_meta_.resize(cfg_.l1.mshr_entries);
}

void Hierarchy::access(const MemoryRequest& req) {
  auto [it, inserted] = pending_.emplace(req.id, Pending{req, kernel_.now()});
  if (!inserted) throw SimulationError("duplicate request id " + std::to_string(req.id));
  try_l1(req.id);
}

void Hierarchy::try_l1(RequestId id) {
  Pending& p = pending_.at(id);
  const MemoryRequest& r = p.req;
  const Cycle now = kernel_.now();
  const RequestOrigin origin{r.kind, r.op_seq};
  const LookupResult res = r.kind == RequestKind::Store
                               ? l1_.write_store(r.addr, r.no_fill, now, id, origin)
                               : l1_.lookup(r.addr, r.no_fill, now, id, origin);
  switch (res.kind) {
    case LookupResult::Kind::Hit:
      kernel_.schedule_in(res.latency, ev::DemandDone{id});
      break;
    case LookupResult::Kind::MissAllocated:
      l1_meta_[res.mshr] = {};
      forward_to_l2(res.mshr);
      if (defense_.kind == DefenseKind::RandomFill) {
        const Addr base = window_base(r.addr, defense_.window_lines, cfg_.l1.line_bytes);
        const Addr line = base + window_rng_.rand_below(defense_.window_lines) * cfg_.l1.line_bytes;
        fetch_line(line, RequestKind::RandomFill);
      }
      break;
    case LookupResult::Kind::MissMerged:
      p.merged = true;
      // The merging access is non-speculative; its fill would have been
      // allowed at L2 too.
      if (res.cleared_no_fill)
        l2_.apply_nofillclear(l1_.line_addr(r.addr), now, ClearCause::NonSpecAccess);
      break;
    case LookupResult::Kind::Blocked:
      ++p.blocked;
      kernel_.schedule_in(1, ev::RetryDemand{id});
      break;
  }
}

void Hierarchy::forward_to_l2(MshrId l1_mshr) {
  const MshrEntry* m = l1_.mshr(l1_mshr);
  if (!m) throw SimulationError("forward_to_l2 on a free L1 MSHR");
  const LookupResult res = l2_.lookup(m->line_addr, m->no_fill, kernel_.now(), l1_mshr, m->origin);
  switch (res.kind) {
    case LookupResult::Kind::Hit:
      l1_meta_[l1_mshr].l2_hit = true;
      kernel_.schedule_in(l2_path_latency(), ev::FillReturn{LevelId::L1, l1_mshr});
      break;
    case LookupResult::Kind::MissAllocated:
      kernel_.schedule_in(mem_path_latency(), ev::FillReturn{LevelId::L2, res.mshr});
      break;
    case LookupResult::Kind::MissMerged:
      break;
    case LookupResult::Kind::Blocked:
      kernel_.schedule_in(1, ev::RetryL2{l1_mshr});
      break;
  }
}

void Hierarchy::complete_l2(MshrId id) {
  FillResult r = l2_.complete_fill(id, repl_rng_, kernel_.now());
  if (r.kind == FillResult::Kind::Blocked) {
    kernel_.schedule_in(1, ev::FillReturn{LevelId::L2, id});
    return;
  }
  if (r.kind == FillResult::Kind::Filled) record_fill(LevelId::L2, r.entry);
  if (r.writeback) to_memory();
  const bool bypassed = r.kind == FillResult::Kind::Bypassed;
  for (RequestId target : r.entry.targets) {
    const auto l1_mshr = static_cast<MshrId>(target);
    l1_meta_[l1_mshr].l2_bypassed = bypassed;
    complete_l1(l1_mshr);
  }
}

void Hierarchy::complete_l1(MshrId id) {
  FillResult r = l1_.complete_fill(id, repl_rng_, kernel_.now());
  if (r.kind == FillResult::Kind::Blocked) {
    kernel_.schedule_in(1, ev::FillReturn{LevelId::L1, id});
    return;
  }
  const L1Meta meta = l1_meta_[id];
  if (r.kind == FillResult::Kind::Filled) record_fill(LevelId::L1, r.entry);
  if (r.writeback) route_writeback(*r.writeback);
  const bool bypassed = r.kind == FillResult::Kind::Bypassed;
  for (RequestId target : r.entry.targets) finish(target, false, meta, bypassed);
}

void Hierarchy::finish(RequestId id, bool l1_hit, const L1Meta& meta, bool l1_bypassed) {
  auto it = pending_.find(id);
  if (it == pending_.end()) return;
  AccessOutcome o;
  o.total_latency = kernel_.now() - it->second.issued_at;
  o.l1_hit = l1_hit;
  o.l2_hit = !l1_hit && meta.l2_hit;
  o.merged = it->second.merged;
  o.blocked_cycles = it->second.blocked;
  if (!l1_hit) {
    const bool l2_bypassed = !meta.l2_hit && meta.l2_bypassed;
    if (l1_bypassed && l2_bypassed) o.fill_suppressed_at = SuppressedAt::Both;
    else if (l1_bypassed) o.fill_suppressed_at = SuppressedAt::L1;
    else if (l2_bypassed) o.fill_suppressed_at = SuppressedAt::L2;
  }
  const MemoryRequest req = it->second.req;
  pending_.erase(it);
  if (on_complete_) on_complete_(req, o);
}

void Hierarchy::record_fill(LevelId level, const MshrEntry& m) {
  FillProvenance p = FillProvenance::DemandAuthorized;
  Cycle trigger = m.issued_at;
  switch (m.origin.kind) {
    case RequestKind::ShbFetch: p = FillProvenance::ShbFetch; break;
    case RequestKind::RandomFill: p = FillProvenance::RandomFill; break;
    case RequestKind::Load:
    case RequestKind::Store:
      if (m.cleared_by == ClearCause::ShbFetch) {
        p = FillProvenance::NoFillClearOnShb;
        trigger = m.cleared_at;
      } else if (m.cleared_by == ClearCause::NonSpecAccess) {
        p = FillProvenance::NonSpecMerge;
        trigger = m.cleared_at;
      } else if (m.origin.kind == RequestKind::Store) {
        p = FillProvenance::Store;
      } else if (authorized_ && !authorized_(m.origin.op_seq)) {
        p = FillProvenance::SpeculativeUnauthorized;
      }
      break;
  }
  ++provenance_[static_cast<std::size_t>(p)];
  if (log_fills_) fill_log_.push_back({kernel_.now(), level, m.line_addr, p, trigger});
}

void Hierarchy::route_writeback(WritebackEntry wb) {
  if (!cfg_.protect_writebacks) wb.no_fill = false;
  const WritebackAccept r = l2_.accept_writeback(wb, repl_rng_);
  switch (r.kind) {
    case WritebackAccept::Kind::Updated: break;
    case WritebackAccept::Kind::Forwarded: to_memory(); break;
    case WritebackAccept::Kind::Allocated:
      ++provenance_[static_cast<std::size_t>(FillProvenance::WritebackAlloc)];
      if (log_fills_)
        fill_log_.push_back({kernel_.now(), LevelId::L2, l2_.line_addr(wb.line_addr),
                             FillProvenance::WritebackAlloc, kernel_.now()});
      if (r.evicted) to_memory();
      break;
  }
}

ClearReport Hierarchy::propagate_nofillclear(Addr line) {
  const Cycle now = kernel_.now();
  if (l1_.apply_nofillclear(line, now, ClearCause::ShbFetch) == ClearResult::NoMatch)
    return ClearReport::NoMatch;
  // Only forwarded when L1 matched: every L2 MSHR has a live L1 parent.
  if (l2_.apply_nofillclear(line, now, ClearCause::ShbFetch) == ClearResult::Cleared)
    return ClearReport::ClearedL1L2;
  return ClearReport::ClearedL1;
}

FetchOutcome Hierarchy::shb_fetch(Addr line) { return fetch_line(line, RequestKind::ShbFetch); }

FetchOutcome Hierarchy::fetch_line(Addr addr, RequestKind kind) {
  const Addr line = l1_.line_addr(addr);
  const bool shb = kind == RequestKind::ShbFetch;
  if (defense_.nofillclear) propagate_nofillclear(line);
  if (l1_.contains(line)) {
    if (shb) ++shb_stats_.already_resident;
    return FetchOutcome::AlreadyResident;
  }
  if (l1_.find_mshr(line)) {
    if (shb) ++shb_stats_.merged_pending;
    return FetchOutcome::MergedPending;
  }
  auto id = l1_.allocate_fetch(line, kernel_.now(), RequestOrigin{kind, 0});
  if (!id) {
    if (shb) ++shb_stats_.dropped_full_mshr;
    return FetchOutcome::Dropped;
  }
  if (shb) ++shb_stats_.issued;
  else ++random_fill_fetches_;
  l1_meta_[*id] = {};
  forward_to_l2(*id);
  return FetchOutcome::Issued;
}

FlushResult Hierarchy::flush(Addr addr) {
  const FlushResult a = l1_.flush_line(addr);
  const FlushResult b = l2_.flush_line(addr);
  FlushResult r;
  const bool present = a.kind != FlushResult::Kind::NotPresent ||
                       b.kind != FlushResult::Kind::NotPresent;
  r.latency = cfg_.l1.hit_latency + (present ? 1 : 0);
  if (a.writeback || b.writeback) {
    r.kind = FlushResult::Kind::FlushedDirty;
    r.writeback = a.writeback ? a.writeback : b.writeback;
    to_memory();
  } else {
    r.kind = present ? FlushResult::Kind::FlushedClean : FlushResult::Kind::NotPresent;
  }
  return r;
}

bool Hierarchy::handle(const Event& event) {
  if (const auto* e = std::get_if<ev::FillReturn>(&event)) {
    if (e->level == LevelId::L1) complete_l1(e->mshr);
    else complete_l2(e->mshr);
    return true;
  }
  if (const auto* e = std::get_if<ev::RetryDemand>(&event)) {
    try_l1(e->request);
    return true;
  }
  if (const auto* e = std::get_if<ev::RetryL2>(&event)) {
    if (l1_.mshr(e->l1_mshr)) forward_to_l2(e->l1_mshr);
    return true;
  }
  if (const auto* e = std::get_if<ev::DemandDone>(&event)) {
    finish(e->request, true, {}, false);
    return true;
  }
  return false;
}

Metrics Hierarchy::metrics() const {
  Metrics m;
  m.l1 = l1_.stats();
  m.l2 = l2_.stats();
  m.shb = shb_stats_;
  m.random_fill_fetches = random_fill_fetches_;
  m.writebacks_to_memory = writebacks_to_memory_;
  m.fills_by_provenance = provenance_;
  m.cycles_total = kernel_.now();
  return m;
}

}  // namespace rascache
