// Acceptance suite: one PASS/FAIL line per primary criterion.
#include <algorithm>
#include <atomic>
#include <boost/math/distributions/chi_squared.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "rascache/attacks.hpp"
#include "rascache/harness.hpp"
#include "rascache/machine.hpp"
#include "rascache/workloads.hpp"

using namespace rascache;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Report {
  std::vector<std::string> notes;
  bool ok = true;

  void check(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      notes.push_back("violated: " + what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double chi_square_p(const std::vector<std::uint64_t>& counts) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  const double expected = static_cast<double>(total) / static_cast<double>(counts.size());
  double stat = 0;
  for (auto c : counts) {
    const double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

// Runs `jobs` on up to hardware_concurrency threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& job) {
  const unsigned width = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                                         static_cast<unsigned>(n)));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < width; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) job(i);
    });
  for (auto& th : pool) th.join();
}

AttackParams params(DefenseMode d, std::uint64_t seed = 1) {
  AttackParams p;
  p.defense = d;
  p.seed = seed;
  p.trials = 64;
  return p;
}

std::string verdict_str(const AttackResult& r) {
  std::ostringstream os;
  os << "guessed=";
  if (r.verdict.guessed) os << *r.verdict.guessed;
  else os << "none";
  os << " truth=" << r.truth << " z=" << fmt("%.2f", r.verdict.separation);
  return os.str();
}

const DefenseMode kRasSpec = DefenseMode::ras_spec(3, 1, 4);
const DefenseMode kRasPlus = DefenseMode::ras_plus(3, 4, 64);

// ---------------------------------------------------------------------------

template <typename Run>
Report spectre_criterion(const char* name, Run run) {
  Report rep;
  Rng rng(0x5EC7E7);
  std::vector<std::uint8_t> secrets{30};
  for (int i = 0; i < 16; ++i) secrets.push_back(static_cast<std::uint8_t>(rng.rand_below(256)));

  for (const DefenseMode& d : {DefenseMode::baseline(), kRasSpec, kRasPlus}) {
    const auto t0 = Clock::now();
    int leaks = 0;
    for (std::size_t i = 0; i < secrets.size(); ++i) {
      const AttackResult r = run(params(d, 1 + i), secrets[i]);
      if (d.kind == DefenseKind::BaselineLru) {
        rep.check(r.verdict.correct && r.verdict.separation >= 4.0,
                  std::string(name) + " baseline secret " + std::to_string(secrets[i]) + ": " +
                      verdict_str(r));
        if (i == 0) rep.note("baseline secret 30: " + verdict_str(r));
      } else {
        rep.check(!r.verdict.guessed, d.label() + " secret " + std::to_string(secrets[i]) +
                                          ": " + verdict_str(r));
      }
      if (r.verdict.guessed) ++leaks;
    }
    const double secs = seconds_since(t0);
    rep.check(secs < 10.0, d.label() + " took " + fmt("%.2f s", secs));
    rep.note(d.label() + ": " + std::to_string(leaks) + "/" + std::to_string(secrets.size()) +
             " guessed, " + fmt("%.2f s", secs));
  }
  return rep;
}

Report crit_spectre_fr() {
  return spectre_criterion("spectre-fr", [](const AttackParams& p, std::uint8_t s) {
    return run_spectre_fr(p, s, 64);
  });
}

Report crit_spectre_pp() {
  return spectre_criterion("spectre-pp", [](const AttackParams& p, std::uint8_t s) {
    return run_spectre_pp(p, s);
  });
}

// ---------------------------------------------------------------------------

Report crit_aes_suite() {
  Report rep;
  const auto t0 = Clock::now();

  Rng krng(0xAE5);
  auto random_key = [&] {
    AesKey k{};
    for (auto& b : k) b = static_cast<std::uint8_t>(krng.rand_below(256));
    return k;
  };

  struct Job {
    std::string label;
    std::function<AttackResult()> run;
    bool expect_leak;
    std::uint32_t expect_guess;
  };
  std::vector<Job> jobs;

  AesKey base = random_key();
  base[0] = 0x00;
  jobs.push_back({"baseline aes-pp", [base] { return run_aes_pp(params(DefenseMode::baseline()), base, 0); },
                  true, 0x0});
  jobs.push_back({"baseline aes-fr", [base] { return run_aes_fr(params(DefenseMode::baseline()), base, 0); },
                  true, 0x0});
  AesKey et = random_key();
  et[3] = 0x65;
  et[7] = 0x5e;
  jobs.push_back({"baseline aes-evict-time",
                  [et] { return run_aes_evict_time(params(DefenseMode::baseline()), et); }, true, 0x3});
  AesKey co = random_key();
  co[0] = 0x0f;
  co[4] = 0xe6;
  jobs.push_back({"baseline aes-collision",
                  [co] { return run_aes_collision(params(DefenseMode::baseline()), co, 1); }, true, 0xe});

  for (int k = 0; k < 8; ++k) {
    const AesKey key = random_key();
    const std::uint64_t seed = 100 + static_cast<std::uint64_t>(k);
    const std::string tag = " key#" + std::to_string(k);
    jobs.push_back({"ras-plus-W64 aes-pp" + tag,
                    [key, seed] { return run_aes_pp(params(kRasPlus, seed), key, 0); }, false, 0});
    jobs.push_back({"ras-plus-W64 aes-fr" + tag,
                    [key, seed] { return run_aes_fr(params(kRasPlus, seed), key, 0); }, false, 0});
    jobs.push_back({"ras-plus-W64 aes-evict-time" + tag,
                    [key, seed] { return run_aes_evict_time(params(kRasPlus, seed), key); }, false, 0});
    for (std::uint32_t w : {4u, 16u, 64u}) {
      const DefenseMode d = DefenseMode::ras_plus(3, 4, w);
      jobs.push_back({d.label() + " aes-collision" + tag,
                      [key, seed, d] { return run_aes_collision(params(d, seed), key, 1); }, false, 0});
    }
  }

  std::vector<AttackResult> results(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) { results[i] = jobs[i].run(); });

  std::map<std::string, int> leaks_by_attack;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const Job& j = jobs[i];
    const AttackResult& r = results[i];
    if (j.expect_leak) {
      rep.check(r.verdict.guessed && *r.verdict.guessed == j.expect_guess,
                j.label + ": " + verdict_str(r));
      rep.note(j.label + ": " + verdict_str(r));
    } else {
      const std::string attack = j.label.substr(0, j.label.find(" key#"));
      leaks_by_attack[attack] += r.defeated() ? 0 : 1;
      rep.check(r.defeated(), j.label + ": " + verdict_str(r));
    }
  }
  for (const auto& [attack, n] : leaks_by_attack)
    rep.note(attack + ": " + std::to_string(n) + "/8 keys recovered");
  const double secs = seconds_since(t0);
  rep.check(secs < 120.0, "suite took " + fmt("%.1f s", secs));
  rep.note("suite wall time " + fmt("%.1f s", secs));
  return rep;
}

// ---------------------------------------------------------------------------

constexpr Addr kFuzzRegions[] = {0x100000, 0x240000, 0x3F0000};

std::vector<MemOp> fuzz_stream(Rng& rng) {
  const std::size_t n = 8 + rng.rand_below(17);
  const Addr region = kFuzzRegions[rng.rand_below(3)];
  std::vector<MemOp> prog;
  Cycle t = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Addr a = region + rng.rand_below(64 * 1024 / 8) * 8;
    const auto kind = rng.rand_below(10);
    MemOp op = kind < 6 ? MemOp::load(a) : kind < 9 ? MemOp::store(a) : MemOp::flush(a);
    if (i > 0 && rng.rand_below(4) == 0) {
      op.chained(rng.rand_below(8));
    } else {
      t += rng.rand_below(24);
      op.issue_at = t;
    }
    if (op.kind != OpKind::Flush) {
      const auto r = rng.rand_below(3);
      if (r == 0) op.authorize_in(0);
      else if (r == 1) op.authorize_in(1 + static_cast<std::int64_t>(rng.rand_below(120)));
      else op.squash_in(static_cast<std::int64_t>(rng.rand_below(121)) - 1);
    }
    prog.push_back(op);
  }
  return prog;
}

struct WindowCheck {
  std::uint64_t fills = 0;
  std::uint64_t violations = 0;
  std::string first_violation;
};

// Every fill must trace back to an SHB emission whose snapshot holds an entry
// covering the filled line; L2 writeback allocations must carry a line that
// was itself filled that way.
void check_windows(const Machine& m, std::uint32_t window, std::uint32_t line_bytes,
                   WindowCheck& out) {
  const auto& ems = m.emission_log();
  std::vector<Addr> verified;
  for (const FillRecord& f : m.hierarchy().fill_log()) {
    ++out.fills;
    bool ok = false;
    if (f.provenance == FillProvenance::ShbFetch ||
        f.provenance == FillProvenance::NoFillClearOnShb) {
      for (auto it = ems.rbegin(); it != ems.rend(); ++it) {
        if (it->cycle > f.trigger_cycle) continue;
        if (line_of(it->fetch_addr, line_bytes) != f.line) continue;
        const Addr wb = window_base(f.line, window, line_bytes);
        ok = std::any_of(it->entries.begin(), it->entries.end(), [&](Addr e) {
          return window_base(e, window, line_bytes) == wb;
        });
        break;
      }
    } else if (f.provenance == FillProvenance::WritebackAlloc) {
      ok = std::find(verified.begin(), verified.end(), f.line) != verified.end();
    }
    if (ok) {
      verified.push_back(f.line);
    } else {
      if (out.violations++ == 0) {
        std::ostringstream os;
        os << "line 0x" << std::hex << f.line << std::dec << " provenance "
           << to_string(f.provenance) << " at cycle " << f.cycle;
        out.first_violation = os.str();
      }
    }
  }
}

Report crit_no_spec_fill() {
  Report rep;
  constexpr int kStreams = 10000;
  const DefenseMode spec_modes[] = {DefenseMode::ras_spec(3, 1, 4), DefenseMode::ras_spec(5, 1, 1),
                                    DefenseMode::ras_spec(3, 4, 16)};
  const DefenseMode plus_modes[] = {DefenseMode::ras_plus(3, 4, 4), DefenseMode::ras_plus(3, 4, 64),
                                    DefenseMode::ras_plus(7, 2, 16)};
  HierarchyConfig small;  // tiny L1 so streams also evict and write back
  small.l1.num_sets = 8;
  small.l1.ways = 2;
  small.l1.mshr_entries = 4;
  small.l1.lfb_entries = 4;

  std::uint64_t spec_fills = 0, unauthorized = 0, forced_unauthorized = 0;
  WindowCheck plus, forced;
  std::uint64_t spec_fill_total_plus = 0;
  Rng rng(0xF022);
  for (int s = 0; s < kStreams; ++s) {
    const auto prog = fuzz_stream(rng);
    const HierarchyConfig cfg = (s % 2) ? small : HierarchyConfig{};
    const std::uint64_t seed = 1 + static_cast<std::uint64_t>(s);

    MachineOptions opt;
    opt.clamp_rob_order = true;
    {
      Machine m(cfg, spec_modes[s % 3], seed, opt);
      m.run(prog);
      const Metrics mt = m.metrics();
      for (auto c : mt.fills_by_provenance) spec_fills += c;
      unauthorized += mt.fills(FillProvenance::SpeculativeUnauthorized);
    }
    {
      MachineOptions o = opt;
      o.record_logs = true;
      const DefenseMode d = plus_modes[s % 3];
      Machine m(cfg, d, seed, o);
      m.run(prog);
      m.idle(200);
      check_windows(m, d.window_lines, cfg.l1.line_bytes, plus);
      spec_fill_total_plus += m.metrics().fills(FillProvenance::SpeculativeUnauthorized);
    }
    if (s % 10 == 0) {
      // The same checks must notice fills when no-fill is switched off.
      MachineOptions o = opt;
      o.force_fill = true;
      o.record_logs = true;
      Machine ms(cfg, spec_modes[s % 3], seed, o);
      ms.run(prog);
      forced_unauthorized += ms.metrics().fills(FillProvenance::SpeculativeUnauthorized);
      Machine mp(cfg, plus_modes[s % 3], seed, o);
      mp.run(prog);
      check_windows(mp, plus_modes[s % 3].window_lines, cfg.l1.line_bytes, forced);
    }
  }
  rep.check(unauthorized == 0,
            "ras-spec produced " + std::to_string(unauthorized) + " unauthorized speculative fills");
  rep.check(plus.violations == 0, "ras-plus fill outside any SHB window (" +
                                      std::to_string(plus.violations) + "), first: " +
                                      plus.first_violation);
  rep.check(spec_fill_total_plus == 0, "ras-plus produced unauthorized speculative fills");
  rep.check(plus.fills > 0, "ras-plus fuzz produced no fills at all");
  rep.check(forced_unauthorized > 0, "force-fill control produced no unauthorized fills");
  rep.check(forced.violations > 0, "force-fill control passed the window check");
  rep.note(std::to_string(kStreams) + " streams; ras-spec fills " + std::to_string(spec_fills) +
           ", unauthorized " + std::to_string(unauthorized));
  rep.note("ras-plus fills checked " + std::to_string(plus.fills) + ", violations " +
           std::to_string(plus.violations));
  rep.note("force-fill control: unauthorized " + std::to_string(forced_unauthorized) +
           ", window violations " + std::to_string(forced.violations));
  return rep;
}

// ---------------------------------------------------------------------------

Report crit_constant_rate() {
  Report rep;
  for (std::uint32_t r : {3u, 5u, 7u, 10u}) {
    for (Cycle total : {997ull, 5000ull, 12345ull}) {
      std::vector<std::vector<Cycle>> stamps;
      std::vector<std::uint64_t> ticks;
      for (int variant = 0; variant < 2; ++variant) {
        // Identical issue times and resolutions; variant 0 re-touches one
        // line (hits), variant 1 walks fresh lines (misses).
        std::vector<MemOp> prog;
        for (int i = 0; i < 40; ++i) {
          const Addr a = variant == 0 ? 0x8000 + (i % 2) * 8 : 0x80000 + static_cast<Addr>(i) * 4096;
          MemOp op = MemOp::load(a, static_cast<Cycle>(i) * 5);
          op.authorize_in(i % 3 == 0 ? 0 : 4);
          prog.push_back(op);
        }
        MachineOptions o;
        o.record_logs = true;
        Machine m({}, DefenseMode::ras_spec(r, 2, 4), 9, o);
        m.run(prog);
        rep.check(m.now() < total, "program outran the horizon");
        m.idle(total - m.now());
        std::vector<Cycle> s;
        for (const auto& e : m.emission_log())
          if (e.cycle > 0 && e.cycle <= total) s.push_back(e.cycle);
        stamps.push_back(std::move(s));
        ticks.push_back(m.metrics().shb.ticks);
      }
      const std::string tag = "R=" + std::to_string(r) + " T=" + std::to_string(total);
      rep.check(stamps[0] == stamps[1], tag + ": emission timestamps differ between miss patterns");
      rep.check(stamps[0].size() == total / r,
                tag + ": " + std::to_string(stamps[0].size()) + " emissions, expected " +
                    std::to_string(total / r));
      // Tick at cycle 0 plus one per R in (0, T].
      rep.check(ticks[0] == total / r + 1 && ticks[1] == total / r + 1,
                tag + ": tick count " + std::to_string(ticks[0]));
    }
  }
  rep.note("R in {3,5,7,10}, T in {997,5000,12345}: emissions identical, count floor(T/R)");
  return rep;
}

// ---------------------------------------------------------------------------

Report crit_uniformity() {
  Report rep;
  constexpr int kDraws = 100000;
  {
    Kernel kernel;
    Hierarchy h({}, DefenseMode::sa_random(), 1, kernel);
    h.set_completion_handler([](const MemoryRequest&, const AccessOutcome&) {});
    for (RequestId i = 0; i < 8; ++i) {
      h.access({i + 1, RequestKind::Load, 0x10000 + i * 4096, false, i + 1});
      while (!kernel.empty()) kernel.step([&](const ScheduledEvent<Event>& e) { h.handle(e.payload); });
    }
    bool full = true;
    for (Addr i = 0; i < 8; ++i) full = full && h.l1().contains(0x10000 + i * 4096);
    rep.check(full, "set 0 not full before victim draws");
    Rng rng(1 ^ stream::kReplacement);
    std::vector<std::uint64_t> counts(8, 0);
    for (int i = 0; i < kDraws; ++i) ++counts[h.l1().select_victim(0, rng)];
    const double p = chi_square_p(counts);
    rep.check(p > 0.001, "victim-way chi-square p=" + fmt("%.3g", p));
    rep.note("victim way (8 ways): p=" + fmt("%.4f", p));
  }
  {
    constexpr std::uint32_t kEntries = 4, kWindow = 16;
    SafeHistoryBuffer shb(kEntries, 3, kWindow, 64, 7);
    for (Addr e = 0; e < kEntries; ++e) shb.insert(0x40000 * (e + 1) + 0x123);
    std::vector<std::uint64_t> joint(kEntries * kWindow, 0), lines(kWindow, 0), entries(kEntries, 0);
    bool inside = true;
    for (int i = 0; i < kDraws; ++i) {
      const Addr a = *shb.select_fetch_address();
      const Addr e = a / 0x40000 - 1;
      const Addr base = window_base(0x40000 * (e + 1) + 0x123, kWindow, 64);
      if (e >= kEntries || a < base || a >= base + kWindow * 64 || a % 64 != 0) {
        inside = false;
        continue;
      }
      const Addr l = (a - base) / 64;
      ++joint[e * kWindow + l];
      ++lines[l];
      ++entries[e];
    }
    rep.check(inside, "fetch address outside its entry's window");
    const double pj = chi_square_p(joint), pl = chi_square_p(lines), pe = chi_square_p(entries);
    rep.check(pj > 0.001, "SHB entry x line chi-square p=" + fmt("%.3g", pj));
    rep.check(pl > 0.001, "SHB window-line chi-square p=" + fmt("%.3g", pl));
    rep.check(pe > 0.001, "SHB entry chi-square p=" + fmt("%.3g", pe));
    rep.note("SHB E4 W16: entry p=" + fmt("%.4f", pe) + ", line p=" + fmt("%.4f", pl) +
             ", joint (63 dof) p=" + fmt("%.4f", pj));
  }
  {
    SafeHistoryBuffer shb(1, 3, 64, 64, 11);
    shb.insert(0x123456);
    std::vector<std::uint64_t> lines(64, 0);
    const Addr base = window_base(0x123456, 64, 64);
    for (int i = 0; i < kDraws; ++i) ++lines[(*shb.select_fetch_address() - base) / 64 % 64];
    const double p = chi_square_p(lines);
    rep.check(p > 0.001, "SHB W64 line chi-square p=" + fmt("%.3g", p));
    rep.note("SHB E1 W64: line p=" + fmt("%.4f", p));
  }
  return rep;
}

// ---------------------------------------------------------------------------

Cycle writeback_probe(bool protect) {
  HierarchyConfig cfg;
  cfg.protect_writebacks = protect;
  Kernel kernel;
  Hierarchy h(cfg, DefenseMode::ras_plus(3, 4, 64), 1, kernel);
  std::map<RequestId, AccessOutcome> done;
  h.set_completion_handler([&](const MemoryRequest& r, const AccessOutcome& o) { done[r.id] = o; });
  auto drain = [&] {
    while (!kernel.empty()) kernel.step([&](const ScheduledEvent<Event>& e) { h.handle(e.payload); });
  };
  constexpr Addr kLine = 0xA000;
  h.access({1, RequestKind::Store, kLine, true, 1});
  drain();
  h.access({2, RequestKind::Load, kLine, true, 2});
  drain();
  return done.at(2).total_latency;
}

Report crit_writeback() {
  Report rep;
  const Cycle prot = writeback_probe(true);
  const Cycle unprot = writeback_probe(false);
  rep.check(prot == 164, "protected probe latency " + std::to_string(prot) + ", expected an L2 miss (164)");
  rep.check(unprot == 14, "unprotected probe latency " + std::to_string(unprot) + ", expected an L2 hit (14)");
  rep.note("probe after no-fill dirty store: protected " + std::to_string(prot) +
           " cycles, no_fill stripped " + std::to_string(unprot) + " cycles");
  return rep;
}

// ---------------------------------------------------------------------------

Report crit_trends() {
  Report rep;
  const Trace trace = generate_trace(LocalityModel{}, 100000, 1);
  auto run = [&](DefenseMode d) { return replay(trace, d, {}, 1); };

  const Metrics p4 = run(DefenseMode::ras_plus(3, 4, 4));
  const Metrics p16 = run(DefenseMode::ras_plus(3, 4, 16));
  const Metrics p64 = run(DefenseMode::ras_plus(3, 4, 64));
  const double m4 = p4.l1.miss_rate(), m16 = p16.l1.miss_rate(), m64 = p64.l1.miss_rate();
  rep.check(m4 < m16 && m16 < m64, "(a) ras-plus miss rate not increasing in W");
  rep.note("(a) ras-plus L1 miss W4/W16/W64: " + fmt("%.4f", m4) + " " + fmt("%.4f", m16) + " " +
           fmt("%.4f", m64));

  std::vector<Metrics> spec;
  for (std::uint32_t w : {1u, 4u, 16u}) spec.push_back(run(DefenseMode::ras_spec(3, 1, w)));
  std::vector<double> shb_pct;
  for (const Metrics& m : spec) shb_pct.push_back(split_percentages(m.l1.nofill).cleared_by_shb_fetch);
  rep.check(shb_pct[0] >= shb_pct[1] && shb_pct[1] >= shb_pct[2],
            "(b) cleared-by-SHB percentage increases with W");
  rep.note("(b) ras-spec L1 cleared-by-SHB % W1/W4/W16: " + fmt("%.2f", shb_pct[0]) + " " +
           fmt("%.2f", shb_pct[1]) + " " + fmt("%.2f", shb_pct[2]));

  std::vector<Metrics> all = spec;
  all.push_back(p4);
  all.push_back(p16);
  all.push_back(p64);
  std::string c_line = "(c) cleared % L1 vs L2:";
  for (const Metrics& m : all) {
    const auto l1 = split_percentages(m.l1.nofill), l2 = split_percentages(m.l2.nofill);
    const double c1 = l1.cleared_by_shb_fetch + l1.cleared_by_nonspec_access;
    const double c2 = l2.cleared_by_shb_fetch + l2.cleared_by_nonspec_access;
    rep.check(c2 >= c1, "(c) L2 clearance below L1: " + fmt("%.2f", c2) + " < " + fmt("%.2f", c1));
    c_line += " " + fmt("%.1f", c1) + "/" + fmt("%.1f", c2);
  }
  rep.note(c_line);

  DefenseMode nonfc = DefenseMode::ras_spec(3, 1, 4);
  nonfc.nofillclear = false;
  const double with = spec[1].l1.miss_rate(), without = run(nonfc).l1.miss_rate();
  rep.check(without > with, "(d) disabling NoFillClear did not worsen the miss rate");
  rep.note("(d) ras-spec-W4 L1 miss: nofillclear " + fmt("%.4f", with) + ", disabled " +
           fmt("%.4f", without));
  return rep;
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> dir_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path().string());
  return out;
}

Report crit_determinism() {
  Report rep;
  const fs::path shipped = fs::path(RASCACHE_SOURCE_DIR) / "experiments";
  const fs::path tmp = fs::temp_directory_path() / ("rascache_accept_" + std::to_string(::getpid()));
  fs::remove_all(tmp);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(shipped))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  rep.check(!files.empty(), "no shipped experiments found in " + shipped.string());

  std::size_t compared = 0;
  for (const fs::path& f : files) {
    const std::string name = f.stem().string();
    const std::string text = read_file(f.string());
    if (name.rfind("sweep", 0) == 0) {
      const auto configs = parse_sweep(text);
      const std::string a = sweep_csv(sweep(configs, 1));
      const std::string b = sweep_csv(sweep(configs, 4));
      rep.check(a == b, name + ": sweep CSV differs between runs");
      compared += 1;
      continue;
    }
    std::map<std::string, std::string> outs[2];
    for (int k = 0; k < 2; ++k) {
      ExperimentConfig cfg = parse_config(text);
      cfg.output_dir = (tmp / name / std::to_string(k)).string();
      run_experiment(cfg);
      outs[k] = dir_bytes(cfg.output_dir);
    }
    rep.check(!outs[0].empty(), name + ": no output files");
    rep.check(outs[0] == outs[1], name + ": outputs differ between runs");
    compared += outs[0].size();
  }
  fs::remove_all(tmp);
  rep.note(std::to_string(files.size()) + " shipped experiments, " + std::to_string(compared) +
           " artifacts byte-identical");
  return rep;
}

// ---------------------------------------------------------------------------

Report crit_random_fill() {
  Report rep;
  const Trace trace = generate_trace(LocalityModel{}, 100000, 1);
  const double rf = replay(trace, DefenseMode::random_fill(4), {}, 1).l1.miss_rate();
  const double rp = replay(trace, DefenseMode::ras_plus(3, 4, 4), {}, 1).l1.miss_rate();
  rep.check(rf >= rp, "random-fill-W4 miss " + fmt("%.4f", rf) + " below ras-plus-W4 " + fmt("%.4f", rp));
  rep.note("L1 miss: random-fill-W4 " + fmt("%.4f", rf) + ", ras-plus-R3E4W4 " + fmt("%.4f", rp));

  // A squashed speculative load under random fill still pulls a neighbour in.
  constexpr Addr kSecretAddr = 0x5000000 + 0x20 * 64 + 0x88;
  const Addr base = window_base(kSecretAddr, 4, 64);
  int filled_runs = 0;
  bool confined = true;
  constexpr int kRuns = 32;
  for (int s = 0; s < kRuns; ++s) {
    MachineOptions o;
    o.record_logs = true;
    Machine m({}, DefenseMode::random_fill(4), 1 + static_cast<std::uint64_t>(s), o);
    m.run({MemOp::load(kSecretAddr).squash_in(10)});
    bool any = false;
    for (const FillRecord& f : m.hierarchy().fill_log()) {
      if (f.line < base || f.line >= base + 4 * 64) confined = false;
      if (f.level == LevelId::L1) any = true;
    }
    bool resident = false;
    for (Addr l = base; l < base + 4 * 64; l += 64) resident = resident || m.hierarchy().l1().contains(l);
    if (any && resident) ++filled_runs;
  }
  rep.check(confined, "random fill landed outside the squashed load's window");
  rep.check(filled_runs == kRuns, "squashed load left its window cold in " +
                                      std::to_string(kRuns - filled_runs) + " runs");
  rep.note("squashed load: window-confined L1 fill in " + std::to_string(filled_runs) + "/" +
           std::to_string(kRuns) + " runs");
  return rep;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Report (*run)();
  };
  const Criterion criteria[] = {
      {"spectre_flush_reload_leak_and_defeat", crit_spectre_fr},
      {"spectre_prime_probe_leak_and_defeat", crit_spectre_pp},
      {"aes_four_attack_suite", crit_aes_suite},
      {"no_speculative_fill_invariant", crit_no_spec_fill},
      {"constant_rate_emission", crit_constant_rate},
      {"uniform_victim_and_window_selection", crit_uniformity},
      {"writeback_secrecy", crit_writeback},
      {"locality_model_trends", crit_trends},
      {"determinism_of_shipped_experiments", crit_determinism},
      {"random_fill_comparison", crit_random_fill},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = Clock::now();
    Report r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r.ok = false;
      r.notes.push_back(std::string("exception: ") + e.what());
    }
    std::printf("%s %s (%.1f s)\n", r.ok ? "PASS" : "FAIL", c.name, seconds_since(t0));
    for (const auto& n : r.notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
    if (!r.ok) ++failed;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed,
              std::size(criteria));
  return failed == 0 ? 0 : 1;
}
