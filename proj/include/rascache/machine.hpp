#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "rascache/events.hpp"
#include "rascache/hierarchy.hpp"
#include "rascache/shb.hpp"

namespace rascache {

enum class OpKind : std::uint8_t { Load, Store, Flush };
enum class Resolve : std::uint8_t { Authorize, Squash };
enum class OpState : std::uint8_t { Pending, Speculative, Authorized, Squashed, Dropped };

struct MemOp {
  OpKind kind = OpKind::Load;
  Addr addr = 0;
  // Cycles after program start, or after the previous op's data returned
  // when after_previous is set.
  Cycle issue_at = 0;
  bool after_previous = false;
  Resolve resolve = Resolve::Authorize;
  // Relative to the actual issue cycle. Authorize with delta <= 0 is
  // non-speculative at issue; Squash with delta < 0 drops the op unissued.
  std::int64_t resolve_delta = 0;

  static MemOp load(Addr a, Cycle at = 0) { return {OpKind::Load, a, at}; }
  static MemOp store(Addr a, Cycle at = 0) { return {OpKind::Store, a, at}; }
  static MemOp flush(Addr a, Cycle at = 0) { return {OpKind::Flush, a, at}; }
  MemOp& chained(Cycle gap = 0) {
    after_previous = true;
    issue_at = gap;
    return *this;
  }
  MemOp& authorize_in(std::int64_t d) {
    resolve = Resolve::Authorize;
    resolve_delta = d;
    return *this;
  }
  MemOp& squash_in(std::int64_t d) {
    resolve = Resolve::Squash;
    resolve_delta = d;
    return *this;
  }
};

struct OpResult {
  OpState state = OpState::Pending;
  bool no_fill = false;
  Cycle issued_at = 0;
  Cycle completed_at = 0;
  Cycle latency = 0;
  AccessOutcome outcome;
};

struct RunResult {
  Cycle start = 0;
  Cycle end = 0;
  std::vector<OpResult> ops;
};

struct MachineOptions {
  // Trace replay clamps out-of-order authorizations instead of failing.
  bool clamp_rob_order = false;
  // Fault injection for the leak guard: every request may fill.
  bool force_fill = false;
  bool record_logs = false;
};

struct EmissionRecord {
  Cycle cycle = 0;
  Addr selected_entry = 0;
  Addr fetch_addr = 0;
  std::vector<Addr> entries;  // SHB contents when the fetch was emitted
};

struct InsertionRecord {
  Cycle cycle = 0;
  Addr addr = 0;
  OpState state_at_insert = OpState::Pending;
};

// Abstract speculative core plus hierarchy and SHB on one event kernel.
// Successive run() calls share cache state and the clock.
class Machine {
 public:
  Machine(HierarchyConfig config, DefenseMode defense, std::uint64_t seed,
          MachineOptions options = {});
  Machine(const Machine&) = delete;
  Machine& operator=(const Machine&) = delete;

  RunResult run(const std::vector<MemOp>& program);
  // Lets the clock run (SHB keeps ticking) until `cycles` have passed.
  void idle(Cycle cycles);

  Cycle now() const { return kernel_.now(); }
  Hierarchy& hierarchy() { return *hier_; }
  const Hierarchy& hierarchy() const { return *hier_; }
  SafeHistoryBuffer* shb() { return shb_.get(); }
  const DefenseMode& defense() const { return defense_; }
  Metrics metrics() const { return hier_->metrics(); }

  const std::vector<EmissionRecord>& emission_log() const { return emissions_; }
  const std::vector<InsertionRecord>& insertion_log() const { return insertions_; }

 private:
  struct Live {
    OpState state = OpState::Pending;
    bool resolved = false;
    bool completed = false;
    bool finished = false;
    Cycle authorize_at = 0;
    OpResult result;
  };

  void dispatch(const Event& e);
  void issue(std::uint32_t i);
  void authorize(std::uint32_t i);
  void squash(std::uint32_t i);
  void send(std::uint32_t i, RequestKind kind);
  void shb_insert(Addr addr, OpState state);
  void complete(std::uint32_t i, Cycle latency, const AccessOutcome* outcome);
  void maybe_finish(std::uint32_t i);
  void schedule_next(std::uint32_t i, bool after_completion);
  bool no_fill_for(OpKind kind, bool speculative) const;
  void on_tick();

  DefenseMode defense_;
  MachineOptions opts_;
  Kernel kernel_;
  std::unique_ptr<Hierarchy> hier_;
  std::unique_ptr<SafeHistoryBuffer> shb_;

  const std::vector<MemOp>* program_ = nullptr;
  std::vector<Live> live_;
  std::vector<std::uint32_t> request_op_;  // request id - base -> op index
  RequestId request_base_ = 0;
  RequestId next_request_ = 0;
  std::uint64_t seq_base_ = 0;
  Cycle start_ = 0;
  Cycle max_authorize_ = 0;
  std::size_t remaining_ = 0;

  std::vector<EmissionRecord> emissions_;
  std::vector<InsertionRecord> insertions_;
};

}  // namespace rascache
