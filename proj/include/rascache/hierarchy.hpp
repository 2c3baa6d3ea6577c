#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "rascache/cache_level.hpp"
#include "rascache/events.hpp"
#include "rascache/metrics.hpp"

namespace rascache {

enum class DefenseKind : std::uint8_t { BaselineLru, SaRandomRepl, RasSpec, RasPlus, RandomFill };

struct DefenseMode {
  DefenseKind kind = DefenseKind::BaselineLru;
  std::uint32_t rate_cycles = 3;   // R
  std::uint32_t shb_entries = 1;   // E
  std::uint32_t window_lines = 1;  // W
  bool nofillclear = true;

  bool uses_shb() const { return kind == DefenseKind::RasSpec || kind == DefenseKind::RasPlus; }
  bool uses_window() const { return uses_shb() || kind == DefenseKind::RandomFill; }
  ReplacementKind replacement() const {
    return kind == DefenseKind::BaselineLru ? ReplacementKind::Lru : ReplacementKind::Random;
  }
  void validate() const;
  // "baseline-lru", "ras-spec-R3E1W4", ...
  std::string label() const;

  static DefenseMode baseline() { return {}; }
  static DefenseMode sa_random() { return {DefenseKind::SaRandomRepl}; }
  static DefenseMode ras_spec(std::uint32_t r, std::uint32_t e, std::uint32_t w) {
    return {DefenseKind::RasSpec, r, e, w};
  }
  static DefenseMode ras_plus(std::uint32_t r, std::uint32_t e, std::uint32_t w) {
    return {DefenseKind::RasPlus, r, e, w};
  }
  static DefenseMode random_fill(std::uint32_t w) { return {DefenseKind::RandomFill, 1, 1, w}; }
};

std::string_view to_string(DefenseKind k);
std::optional<DefenseKind> parse_defense_kind(std::string_view s);

struct HierarchyConfig {
  CacheGeometry l1{};
  CacheGeometry l2{1024, 8, 64, 32, 8, 8, 12};
  Cycle l2_latency = 12;
  Cycle mem_latency = 150;
  // When false, NoFill is stripped from writebacks (the unprotected variant
  // used to demonstrate the writeback channel).
  bool protect_writebacks = true;

  void validate() const;
};

struct MemoryRequest {
  RequestId id = 0;
  RequestKind kind = RequestKind::Load;
  Addr addr = 0;
  bool no_fill = false;
  std::uint64_t op_seq = 0;
};

enum class SuppressedAt : std::uint8_t { None, L1, L2, Both };

struct AccessOutcome {
  Cycle total_latency = 0;
  bool l1_hit = false;
  bool l2_hit = false;
  bool merged = false;        // joined an MSHR someone else allocated
  Cycle blocked_cycles = 0;   // retries spent waiting for an L1 MSHR
  SuppressedAt fill_suppressed_at = SuppressedAt::None;
};

enum class ClearReport : std::uint8_t { ClearedL1, ClearedL1L2, ClearedL2, NoMatch };

enum class FetchOutcome : std::uint8_t { AlreadyResident, MergedPending, Issued, Dropped };

struct FillRecord {
  Cycle cycle = 0;
  LevelId level = LevelId::L1;
  Addr line = 0;
  FillProvenance provenance = FillProvenance::DemandAuthorized;
  // Cycle of the fetch or NoFillClear that made the fill possible.
  Cycle trigger_cycle = 0;
};

// L1D + L2 + fixed-latency memory driven by the shared event kernel.
class Hierarchy {
 public:
  using CompletionFn = std::function<void(const MemoryRequest&, const AccessOutcome&)>;
  using AuthorizedProbe = std::function<bool(std::uint64_t op_seq)>;

  Hierarchy(HierarchyConfig config, DefenseMode defense, std::uint64_t seed, Kernel& kernel);

  void set_completion_handler(CompletionFn fn) { on_complete_ = std::move(fn); }
  void set_authorized_probe(AuthorizedProbe fn) { authorized_ = std::move(fn); }
  void enable_fill_log(bool on) { log_fills_ = on; }

  // Demand load/store. The outcome arrives through the completion handler.
  void access(const MemoryRequest& req);
  void route_writeback(WritebackEntry wb);
  ClearReport propagate_nofillclear(Addr line);
  FetchOutcome shb_fetch(Addr line);
  FlushResult flush(Addr addr);

  // Handles hierarchy events; false for events owned by someone else.
  bool handle(const Event& event);

  bool idle() const { return pending_.empty(); }
  const HierarchyConfig& config() const { return cfg_; }
  const DefenseMode& defense() const { return defense_; }
  CacheLevel& l1() { return l1_; }
  CacheLevel& l2() { return l2_; }
  const CacheLevel& l1() const { return l1_; }
  const CacheLevel& l2() const { return l2_; }

  const std::vector<FillRecord>& fill_log() const { return fill_log_; }
  ShbStats& shb_stats() { return shb_stats_; }
  Metrics metrics() const;

  Cycle l2_path_latency() const { return cfg_.l1.hit_latency + cfg_.l2_latency; }
  Cycle mem_path_latency() const { return l2_path_latency() + cfg_.mem_latency; }

 private:
  struct Pending {
    MemoryRequest req;
    Cycle issued_at = 0;
    Cycle blocked = 0;
    bool merged = false;
  };
  struct L1Meta {
    bool l2_hit = false;
    bool l2_bypassed = false;
  };

  void try_l1(RequestId id);
  void forward_to_l2(MshrId l1_mshr);
  void complete_l1(MshrId id);
  void complete_l2(MshrId id);
  void finish(RequestId id, bool l1_hit, const L1Meta& meta, bool l1_bypassed);
  FetchOutcome fetch_line(Addr line, RequestKind kind);
  void record_fill(LevelId level, const MshrEntry& m);
  void to_memory() { ++writebacks_to_memory_; }

  HierarchyConfig cfg_;
  DefenseMode defense_;
  Kernel& kernel_;
  CacheLevel l1_;
  CacheLevel l2_;
  Rng repl_rng_;
  Rng window_rng_;
  CompletionFn on_complete_;
  AuthorizedProbe authorized_;
  std::unordered_map<RequestId, Pending> pending_;
  std::vector<L1Meta> l1_meta_;
  bool log_fills_ = false;
  std::vector<FillRecord> fill_log_;
  std::array<std::uint64_t, kProvenanceCount> provenance_{};
  ShbStats shb_stats_;
  std::uint64_t random_fill_fetches_ = 0;
  std::uint64_t writebacks_to_memory_ = 0;
};

}  // namespace rascache
