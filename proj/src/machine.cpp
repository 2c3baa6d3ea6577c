#include "rascache/machine.hpp"

#include <algorithm>
#include <string>

namespace rascache {

namespace {
constexpr Cycle kWatchdogCycles = 500'000'000;
}

Machine::Machine(HierarchyConfig config, DefenseMode defense, std::uint64_t seed,
                 MachineOptions options)
    : defense_(defense), opts_(options) {
  hier_ = std::make_unique<Hierarchy>(config, defense, seed, kernel_);
  hier_->enable_fill_log(opts_.record_logs);
  hier_->set_completion_handler([this](const MemoryRequest& req, const AccessOutcome& o) {
    complete(request_op_.at(req.id - request_base_), o.total_latency, &o);
  });
  hier_->set_authorized_probe([this](std::uint64_t seq) {
    if (seq < seq_base_ || seq - seq_base_ >= live_.size()) return true;
    return live_[seq - seq_base_].state == OpState::Authorized;
  });
  if (defense_.uses_shb()) {
    shb_ = std::make_unique<SafeHistoryBuffer>(defense_.shb_entries, defense_.rate_cycles,
                                               defense_.window_lines, config.l1.line_bytes, seed);
    kernel_.schedule(0, ev::ShbTick{});
  }
}

RunResult Machine::run(const std::vector<MemOp>& program) {
  RunResult out;
  out.start = kernel_.now();
  program_ = &program;
  live_.assign(program.size(), Live{});
  request_op_.clear();
  request_base_ = next_request_;
  start_ = kernel_.now();
  max_authorize_ = start_;
  remaining_ = program.size();

  if (!program.empty()) {
    kernel_.schedule(start_ + program[0].issue_at, ev::IssueOp{0});
    while (remaining_ > 0) {
      kernel_.step([this](const ScheduledEvent<Event>& e) { dispatch(e.payload); });
      if (kernel_.now() - start_ > kWatchdogCycles)
        throw SimulationError("program did not terminate within the watchdog budget");
    }
  }

  out.end = kernel_.now();
  out.ops.reserve(live_.size());
  for (const Live& l : live_) {
    out.ops.push_back(l.result);
    out.ops.back().state = l.state;
  }
  seq_base_ += program.size();
  program_ = nullptr;
  live_.clear();
  return out;
}

void Machine::idle(Cycle cycles) {
  const Cycle target = kernel_.now() + cycles;
  while (kernel_.now() < target) {
    auto next = kernel_.next_time();
    if (!next || *next > target) {
      kernel_.advance_to(target);
      break;
    }
    kernel_.step([this](const ScheduledEvent<Event>& e) { dispatch(e.payload); });
  }
}

void Machine::dispatch(const Event& e) {
  if (hier_->handle(e)) return;
  if (std::holds_alternative<ev::ShbTick>(e)) on_tick();
  else if (const auto* x = std::get_if<ev::IssueOp>(&e)) issue(x->index);
  else if (const auto* x = std::get_if<ev::AuthorizeOp>(&e)) authorize(x->index);
  else if (const auto* x = std::get_if<ev::SquashOp>(&e)) squash(x->index);
  else if (const auto* x = std::get_if<ev::OpDone>(&e)) complete(x->index, live_[x->index].result.latency, nullptr);
}

void Machine::on_tick() {
  ShbStats& st = hier_->shb_stats();
  ++st.ticks;
  if (auto em = shb_->tick(kernel_.now())) {
    ++st.emissions;
    if (opts_.record_logs)
      emissions_.push_back({em->cycle, em->selected_entry, em->fetch_addr, shb_->entries()});
    hier_->shb_fetch(em->fetch_addr);
  } else {
    ++st.empty_ticks;
  }
  kernel_.schedule_in(shb_->rate_cycles(), ev::ShbTick{});
}

void Machine::schedule_next(std::uint32_t i, bool after_completion) {
  const std::uint32_t j = i + 1;
  if (j >= program_->size()) return;
  const MemOp& next = (*program_)[j];
  if (next.after_previous != after_completion) return;
  if (after_completion) kernel_.schedule_in(next.issue_at, ev::IssueOp{j});
  else kernel_.schedule(std::max(kernel_.now(), start_ + next.issue_at), ev::IssueOp{j});
}

bool Machine::no_fill_for(OpKind kind, bool speculative) const {
  if (opts_.force_fill) return false;
  switch (defense_.kind) {
    case DefenseKind::BaselineLru:
    case DefenseKind::SaRandomRepl: return false;
    case DefenseKind::RasSpec: return kind == OpKind::Load && speculative;
    case DefenseKind::RasPlus:
    case DefenseKind::RandomFill: return true;
  }
  return false;
}

void Machine::issue(std::uint32_t i) {
  Live& l = live_[i];
  const MemOp& op = (*program_)[i];
  const Cycle now = kernel_.now();
  l.result.issued_at = now;
  schedule_next(i, false);

  if (op.kind == OpKind::Flush) {
    l.state = OpState::Authorized;
    l.resolved = true;
    l.result.latency = hier_->flush(op.addr).latency;
    kernel_.schedule_in(l.result.latency, ev::OpDone{i});
    return;
  }
  if (op.resolve == Resolve::Squash && op.resolve_delta < 0) {
    l.state = OpState::Dropped;
    l.resolved = true;
    complete(i, 0, nullptr);
    return;
  }

  const bool speculative = !(op.resolve == Resolve::Authorize && op.resolve_delta <= 0);
  if (op.resolve == Resolve::Authorize) {
    Cycle at = now + static_cast<Cycle>(std::max<std::int64_t>(op.resolve_delta, 0));
    if (at < max_authorize_) {
      if (!opts_.clamp_rob_order)
        throw SimulationError("op " + std::to_string(i) + " authorizes out of ROB order");
      at = max_authorize_;
    }
    max_authorize_ = at;
    l.authorize_at = at;
  }

  if (!speculative) {
    l.state = OpState::Authorized;
    l.resolved = true;
    shb_insert(op.addr, l.state);
    send(i, op.kind == OpKind::Store ? RequestKind::Store : RequestKind::Load);
    return;
  }

  l.state = OpState::Speculative;
  if (op.resolve == Resolve::Authorize) kernel_.schedule(l.authorize_at, ev::AuthorizeOp{i});
  else kernel_.schedule_in(static_cast<Cycle>(op.resolve_delta), ev::SquashOp{i});
  // Stores reach the cache only at commit.
  if (op.kind == OpKind::Load) send(i, RequestKind::Load);
}

void Machine::send(std::uint32_t i, RequestKind kind) {
  Live& l = live_[i];
  const MemOp& op = (*program_)[i];
  const RequestId id = next_request_++;
  request_op_.push_back(i);
  l.result.no_fill = no_fill_for(op.kind, l.state == OpState::Speculative);
  hier_->access(MemoryRequest{id, kind, op.addr, l.result.no_fill, seq_base_ + i});
}

void Machine::authorize(std::uint32_t i) {
  Live& l = live_[i];
  if (l.state != OpState::Speculative) return;
  l.state = OpState::Authorized;
  l.resolved = true;
  const MemOp& op = (*program_)[i];
  shb_insert(op.addr, l.state);
  if (op.kind == OpKind::Store) send(i, RequestKind::Store);
  maybe_finish(i);
}

void Machine::squash(std::uint32_t i) {
  Live& l = live_[i];
  if (l.state != OpState::Speculative) return;
  l.state = OpState::Squashed;
  l.resolved = true;
  // A squashed store never reached the cache; a squashed load's request
  // keeps flying and completes normally.
  if ((*program_)[i].kind == OpKind::Store) complete(i, 0, nullptr);
  else maybe_finish(i);
}

void Machine::shb_insert(Addr addr, OpState state) {
  if (!shb_) return;
  shb_->insert(addr);
  ++hier_->shb_stats().insertions;
  if (opts_.record_logs) insertions_.push_back({kernel_.now(), addr, state});
}

void Machine::complete(std::uint32_t i, Cycle latency, const AccessOutcome* outcome) {
  Live& l = live_[i];
  if (l.completed) return;
  l.completed = true;
  l.result.completed_at = kernel_.now();
  l.result.latency = latency;
  if (outcome) l.result.outcome = *outcome;
  schedule_next(i, true);
  maybe_finish(i);
}

void Machine::maybe_finish(std::uint32_t i) {
  Live& l = live_[i];
  if (l.resolved && l.completed && !l.finished) {
    l.finished = true;
    --remaining_;
  }
}

}  // namespace rascache
