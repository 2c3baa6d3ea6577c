#include "doctest.h"
#include "rascache/machine.hpp"

using namespace rascache;

namespace {
MachineOptions logged() {
  MachineOptions o;
  o.record_logs = true;
  return o;
}
}  // namespace

TEST_CASE("NoFill assignment per defense") {
  SUBCASE("RaS-Spec") {
    Machine m({}, DefenseMode::ras_spec(3, 1, 4), 1);
    auto r = m.run({MemOp::load(0x1000).authorize_in(0), MemOp::load(0x2000, 1).authorize_in(50),
                    MemOp::store(0x3000, 2).authorize_in(60)});
    CHECK_FALSE(r.ops[0].no_fill);
    CHECK(r.ops[1].no_fill);
    CHECK_FALSE(r.ops[2].no_fill);
  }
  SUBCASE("RaS+") {
    Machine m({}, DefenseMode::ras_plus(3, 4, 64), 1);
    auto r = m.run({MemOp::load(0x1000), MemOp::store(0x3000, 1)});
    CHECK(r.ops[0].no_fill);
    CHECK(r.ops[1].no_fill);
  }
  SUBCASE("baseline") {
    Machine m({}, DefenseMode::baseline(), 1);
    auto r = m.run({MemOp::load(0x1000).authorize_in(40)});
    CHECK_FALSE(r.ops[0].no_fill);
  }
  SUBCASE("fault injection forces fills") {
    MachineOptions o;
    o.force_fill = true;
    Machine m({}, DefenseMode::ras_spec(3, 1, 4), 1, o);
    auto r = m.run({MemOp::load(0x1000).squash_in(200)});
    CHECK_FALSE(r.ops[0].no_fill);
    CHECK(m.hierarchy().l1().contains(0x1000));
  }
}

TEST_CASE("authorization before the fill returns lets the line fill") {
  Machine m({}, DefenseMode::ras_spec(3, 1, 1), 1, logged());
  auto r = m.run({MemOp::load(0x3000).authorize_in(10)});
  CHECK(r.ops[0].no_fill);
  CHECK(r.ops[0].state == OpState::Authorized);
  CHECK(m.hierarchy().l1().contains(0x3000));
  CHECK(m.hierarchy().l2().contains(0x3000));
  const auto& fills = m.hierarchy().fill_log();
  REQUIRE_FALSE(fills.empty());
  for (const auto& f : fills) CHECK(f.provenance == FillProvenance::NoFillClearOnShb);
}

TEST_CASE("authorization after the fill returns leaves the line out") {
  Machine m({}, DefenseMode::ras_spec(3, 1, 1), 1);
  auto r = m.run({MemOp::load(0x3000).authorize_in(400)});
  CHECK(r.ops[0].completed_at - r.ops[0].issued_at == 164);
  CHECK_FALSE(m.hierarchy().l1().contains(0x3000));
  CHECK(m.shb()->entries() == std::vector<Addr>{0x3000});
  m.idle(200);
  CHECK(m.hierarchy().l1().contains(0x3000));
}

TEST_CASE("squash") {
  SUBCASE("squashed load never enters the SHB and does not fill") {
    Machine m({}, DefenseMode::ras_spec(3, 4, 4), 1, logged());
    const auto l1 = m.hierarchy().l1().tags();
    auto r = m.run({MemOp::load(0x3000).squash_in(20)});
    CHECK(r.ops[0].state == OpState::Squashed);
    CHECK(r.ops[0].latency == 164);
    CHECK(m.shb()->size() == 0);
    CHECK(m.insertion_log().empty());
    CHECK(m.hierarchy().l1().tags() == l1);
  }
  SUBCASE("baseline squash still fills") {
    Machine m({}, DefenseMode::baseline(), 1, logged());
    m.run({MemOp::load(0x3000).squash_in(20)});
    CHECK(m.hierarchy().l1().contains(0x3000));
    CHECK(m.hierarchy().fill_log().back().provenance == FillProvenance::SpeculativeUnauthorized);
  }
  SUBCASE("squash before issue drops the op") {
    Machine m({}, DefenseMode::baseline(), 1);
    auto r = m.run({MemOp::load(0x3000).squash_in(-1)});
    CHECK(r.ops[0].state == OpState::Dropped);
    CHECK(m.hierarchy().l1().stats().accesses == 0);
  }
  SUBCASE("squashed store sends nothing") {
    Machine m({}, DefenseMode::baseline(), 1);
    auto r = m.run({MemOp::store(0x3000).squash_in(30)});
    CHECK(r.ops[0].state == OpState::Squashed);
    CHECK(m.hierarchy().l1().stats().accesses == 0);
  }
}

TEST_CASE("stores go to the cache and the SHB at commit") {
  Machine m({}, DefenseMode::ras_spec(3, 4, 1), 1, logged());
  auto r = m.run({MemOp::store(0x4000).authorize_in(30)});
  CHECK(r.ops[0].completed_at >= r.ops[0].issued_at + 30);
  REQUIRE(m.insertion_log().size() == 1);
  CHECK(m.insertion_log()[0].cycle == 30);
  CHECK(m.hierarchy().l1().is_dirty(0x4000));
}

TEST_CASE("out-of-order authorization") {
  Machine m({}, DefenseMode::ras_spec(3, 1, 4), 1);
  const std::vector<MemOp> prog{MemOp::load(0x0).authorize_in(100), MemOp::load(0x40, 1).authorize_in(5)};
  CHECK_THROWS_AS(m.run(prog), SimulationError);

  MachineOptions o;
  o.clamp_rob_order = true;
  Machine clamped({}, DefenseMode::ras_spec(3, 1, 4), 1, o);
  CHECK_NOTHROW(clamped.run(prog));
}

TEST_CASE("chained ops wait for the previous data") {
  Machine m({}, DefenseMode::baseline(), 1);
  auto r = m.run({MemOp::load(0x0), MemOp::load(0x1000).chained(3), MemOp::load(0x0).chained()});
  CHECK(r.ops[1].issued_at == r.ops[0].completed_at + 3);
  CHECK(r.ops[2].issued_at == r.ops[1].completed_at);
  CHECK(r.ops[2].latency == 2);
}

TEST_CASE("SHB ticks at a constant rate regardless of traffic") {
  auto emissions = [](const std::vector<MemOp>& prog) {
    Machine m({}, DefenseMode::ras_plus(3, 4, 64), 9, logged());
    m.run({MemOp::load(0x100)});  // seed the SHB
    m.run(prog);
    m.idle(3000 - m.now());
    std::vector<Cycle> at;
    for (const auto& e : m.emission_log()) at.push_back(e.cycle);
    return std::make_pair(at, m.metrics().shb.ticks);
  };
  std::vector<MemOp> hits, misses;
  for (int i = 0; i < 40; ++i) {
    hits.push_back(MemOp::load(0x100, static_cast<Cycle>(i) * 10));
    misses.push_back(MemOp::load(static_cast<Addr>(i) * 8192, static_cast<Cycle>(i) * 10));
  }
  const auto a = emissions(hits);
  const auto b = emissions(misses);
  CHECK(a.first == b.first);
  for (std::size_t i = 0; i < a.first.size(); ++i) CHECK(a.first[i] % 3 == 0);
  // Ticks fire at 0, 3, ..., 3000.
  CHECK(a.second == 3000 / 3 + 1);
}

TEST_CASE("timing trichotomy on random programs") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (auto d : {DefenseMode::baseline(), DefenseMode::ras_spec(3, 1, 4), DefenseMode::ras_plus(3, 4, 64)}) {
      Machine m({}, d, seed);
      Rng g(seed);
      std::vector<MemOp> prog;
      for (int i = 0; i < 200; ++i) {
        MemOp op = g.rand_below(4) == 0 ? MemOp::store(g.rand_below(256) * 64, i * 3)
                                         : MemOp::load(g.rand_below(256) * 64, i * 3);
        op.authorize_in(static_cast<std::int64_t>(i * 3 + 40) - i * 3);
        prog.push_back(op);
      }
      auto r = m.run(prog);
      for (const auto& op : r.ops) {
        if (op.outcome.merged) continue;
        const Cycle base = op.latency - op.outcome.blocked_cycles;
        CHECK((base == 2 || base == 14 || base == 164));
      }
    }
  }
}
