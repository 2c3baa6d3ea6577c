#include "rascache/attacks.hpp"

#include <algorithm>
#include <numeric>

#include "rascache/machine.hpp"

namespace rascache {

namespace {

constexpr Addr kSpectreShared = 0x1000000;
constexpr Addr kPrimeArray = 0x2000000;
constexpr Addr kSender = 0x3000000;
constexpr Addr kAesTables = 0x4000000;
constexpr Addr kAesPrime = 0x5000000;
constexpr Addr kEvictBuffer = 0x6000000;
constexpr Addr kVictimFiller = 0x7000000;
// Squash lands well after a memory-path fill would have returned.
constexpr std::int64_t kSquashDelay = 200;

MachineOptions machine_options(const AttackParams& p) {
  MachineOptions o;
  o.force_fill = p.force_fill;
  return o;
}

std::vector<std::uint32_t> shuffled(std::uint32_t n, Rng& rng) {
  std::vector<std::uint32_t> v(n);
  std::iota(v.begin(), v.end(), 0u);
  for (std::uint32_t i = n; i > 1; --i) std::swap(v[i - 1], v[rng.rand_below(i)]);
  return v;
}

void push_chained(std::vector<MemOp>& prog, OpKind kind, Addr a) {
  MemOp op{kind, a};
  prog.push_back(op.chained());
}

AesBlock random_block(Rng& rng) {
  AesBlock b{};
  for (auto& x : b) x = static_cast<std::uint8_t>(rng.rand_below(256));
  return b;
}

// Loads of the victim's first round, serialized so that two accesses to one
// line can only meet through the cache, not through a shared MSHR.
// Returns the index of the first table access; fillers are outside the
// timed span.
std::size_t push_encryption(std::vector<MemOp>& prog, const AesModel& aes, const AesBlock& pt,
                            const AttackParams& p) {
  Addr filler = kVictimFiller;
  for (std::uint32_t i = 0; i < p.victim_pre_fillers; ++i, filler += 64)
    push_chained(prog, OpKind::Load, filler);
  const std::size_t first = prog.size();
  for (std::uint32_t j = 0; j < 16; ++j)
    push_chained(prog, OpKind::Load, aes.access_addr(j, p.dummy_victim ? 0 : pt[j]));
  for (std::uint32_t i = 0; i < p.victim_post_fillers; ++i, filler += 64)
    push_chained(prog, OpKind::Load, filler);
  return first;
}

// One untimed pass over the tables so the first sweep point does not pay
// the cold-memory cost alone.
void warm_tables(Machine& m, const AesModel& aes, std::uint32_t line_bytes) {
  std::vector<MemOp> prog;
  for (Addr a : aes.table_lines(line_bytes)) push_chained(prog, OpKind::Load, a);
  m.run(prog);
}

Cycle span(const RunResult& r, std::size_t first, std::size_t count) {
  return r.ops[first + count - 1].completed_at - r.ops[first].issued_at;
}

// Sets covered by table t under the L1 geometry.
std::vector<std::uint32_t> table_sets(const AesModel& aes, std::uint32_t t, const CacheGeometry& g) {
  std::vector<std::uint32_t> sets;
  for (std::uint32_t k = 0; k < AesModel::kTableBytes / g.line_bytes; ++k)
    sets.push_back(static_cast<std::uint32_t>(((aes.table_base(t) / g.line_bytes) + k) % g.num_sets));
  return sets;
}

Addr congruent(Addr region, std::uint32_t set, std::uint32_t way, const CacheGeometry& g) {
  return region + static_cast<Addr>(way) * g.way_size_bytes() + static_cast<Addr>(set) * g.line_bytes;
}

// Nibble-class scores: for each candidate n, the mean over D of the cell
// that candidate predicts for input D.
std::vector<double> nibble_scores(const TimingMatrix& m, std::uint32_t col_offset) {
  std::vector<double> scores(16, 0.0);
  for (std::uint32_t n = 0; n < 16; ++n) {
    double s = 0;
    for (std::uint32_t d = 0; d < 256; ++d) s += m.at(d, col_offset + ((d >> 4) ^ n));
    scores[n] = s / 256.0;
  }
  return scores;
}

// Mean of column `col` over the inputs whose high nibble is n.
std::vector<double> class_scores(const TimingMatrix& m, std::size_t col) {
  std::vector<double> scores(16, 0.0);
  for (std::uint32_t d = 0; d < 256; ++d) scores[d >> 4] += m.at(d, col) / 16.0;
  return scores;
}

AttackResult finish(std::string name, TimingMatrix matrix, std::vector<double> scores, Direction dir,
                    const AttackParams& p, std::uint32_t truth, const Machine& m) {
  AttackResult r;
  r.attack = std::move(name);
  r.verdict = recover(scores, dir, p.threshold_z);
  r.verdict.correct = r.verdict.guessed && *r.verdict.guessed == truth;
  r.matrix = std::move(matrix);
  r.scores = std::move(scores);
  r.truth = truth;
  r.metrics = m.metrics();
  r.cycles = m.now();
  return r;
}

std::uint32_t aes_trials(const AttackParams& p) { return std::max<std::uint32_t>(p.trials, 1); }

}  // namespace

AesModel::AesModel(AesKey key, Addr base) : key_(key), base_(base) {}

std::array<Addr, 16> AesModel::first_round(const AesBlock& pt) const {
  std::array<Addr, 16> out{};
  for (std::uint32_t j = 0; j < 16; ++j) out[j] = access_addr(j, pt[j]);
  return out;
}

std::vector<Addr> AesModel::table_lines(std::uint32_t line_bytes) const {
  std::vector<Addr> lines;
  for (Addr a = base_; a < base_ + kTables * kTableBytes; a += line_bytes) lines.push_back(a);
  return lines;
}

std::vector<std::string> attack_names() {
  return {"spectre-fr", "spectre-pp", "aes-pp", "aes-fr", "aes-evict-time", "aes-collision"};
}

AttackResult run_spectre_fr(const AttackParams& p, std::uint8_t secret, std::uint32_t step) {
  if (step == 0) throw std::invalid_argument("step must be >= 1");
  Machine m(p.hierarchy, p.defense, p.seed, machine_options(p));
  Rng rng(p.seed ^ stream::kWorkload);
  TimingMatrix mat(256, p.trials);
  mat.row_label = "candidate";
  mat.col_label = "trial";

  for (std::uint32_t t = 0; t < p.trials; ++t) {
    std::vector<MemOp> prog;
    for (std::uint32_t i = 0; i < 256; ++i) push_chained(prog, OpKind::Flush, kSpectreShared + Addr{i} * step);
    MemOp spec = MemOp::load(kSpectreShared + Addr{secret} * step);
    prog.push_back(spec.chained().squash_in(p.dummy_victim ? -1 : kSquashDelay));
    const std::size_t first = prog.size();
    const auto order = shuffled(256, rng);
    for (std::uint32_t i : order) push_chained(prog, OpKind::Load, kSpectreShared + Addr{i} * step);
    const RunResult r = m.run(prog);
    for (std::uint32_t k = 0; k < 256; ++k)
      mat.at(order[k], t) = static_cast<double>(r.ops[first + k].latency);
  }
  auto scores = mat.row_means();
  return finish("spectre-fr", std::move(mat), std::move(scores), Direction::Min, p, secret, m);
}

AttackResult run_spectre_pp(const AttackParams& p, std::uint8_t secret) {
  const CacheGeometry& g = p.hierarchy.l1;
  Machine m(p.hierarchy, p.defense, p.seed, machine_options(p));
  TimingMatrix mat(g.num_sets, p.trials);
  mat.row_label = "set";
  mat.col_label = "trial";
  std::vector<double> profile(g.num_sets, 0.0);

  std::vector<Addr> prime;
  for (std::uint32_t s = 0; s < g.num_sets; ++s)
    for (std::uint32_t w = 0; w < g.ways; ++w) prime.push_back(congruent(kPrimeArray, s, w, g));

  auto round = [&](bool with_victim, std::vector<double>& per_set) {
    std::vector<MemOp> prog;
    for (Addr a : prime) push_chained(prog, OpKind::Load, a);
    if (with_victim) {
      MemOp spec = MemOp::load(kSender + Addr{secret} * g.line_bytes);
      prog.push_back(spec.chained().squash_in(p.dummy_victim ? -1 : kSquashDelay));
    }
    const std::size_t first = prog.size();
    for (Addr a : prime) push_chained(prog, OpKind::Load, a);
    const RunResult r = m.run(prog);
    std::fill(per_set.begin(), per_set.end(), 0.0);
    for (std::size_t k = 0; k < prime.size(); ++k)
      per_set[k / g.ways] += static_cast<double>(r.ops[first + k].latency);
  };

  std::vector<double> per_set(g.num_sets);
  for (std::uint32_t t = 0; t < p.trials; ++t) {
    round(false, per_set);
    for (std::uint32_t s = 0; s < g.num_sets; ++s) profile[s] += per_set[s] / p.trials;
    round(true, per_set);
    for (std::uint32_t s = 0; s < g.num_sets; ++s) mat.at(s, t) = per_set[s];
  }
  auto scores = mat.row_means();
  for (std::uint32_t s = 0; s < g.num_sets; ++s) scores[s] -= profile[s];
  return finish("spectre-pp", std::move(mat), std::move(scores), Direction::Max, p,
                secret % g.num_sets, m);
}

AttackResult run_aes_pp(const AttackParams& p, const AesKey& key, std::uint32_t target_byte) {
  if (target_byte >= 16) throw std::invalid_argument("target_byte must be < 16");
  const CacheGeometry& g = p.hierarchy.l1;
  const AesModel aes(key, kAesTables);
  Machine m(p.hierarchy, p.defense, p.seed, machine_options(p));
  Rng rng(p.seed ^ stream::kWorkload);
  warm_tables(m, aes, p.hierarchy.l1.line_bytes);
  const auto sets = table_sets(aes, AesModel::table_of(target_byte), g);
  const std::uint32_t trials = aes_trials(p);
  TimingMatrix mat(256, sets.size());
  mat.row_label = "input";
  mat.col_label = "set";

  std::vector<Addr> prime;
  for (std::uint32_t s : sets)
    for (std::uint32_t w = 0; w < g.ways; ++w) prime.push_back(congruent(kAesPrime, s, w, g));

  for (std::uint32_t d = 0; d < 256; ++d) {
    for (std::uint32_t t = 0; t < trials; ++t) {
      std::vector<MemOp> prog;
      for (Addr a : prime) push_chained(prog, OpKind::Load, a);
      AesBlock pt = random_block(rng);
      pt[target_byte] = static_cast<std::uint8_t>(d);
      push_encryption(prog, aes, pt, p);
      const std::size_t first = prog.size();
      for (Addr a : prime) push_chained(prog, OpKind::Load, a);
      const RunResult r = m.run(prog);
      for (std::size_t k = 0; k < prime.size(); ++k)
        mat.at(d, k / g.ways) += static_cast<double>(r.ops[first + k].latency) / trials;
    }
  }
  auto scores = nibble_scores(mat, 0);
  return finish("aes-pp", std::move(mat), std::move(scores), Direction::Max, p,
                key[target_byte] >> 4, m);
}

AttackResult run_aes_fr(const AttackParams& p, const AesKey& key, std::uint32_t target_byte) {
  if (target_byte >= 16) throw std::invalid_argument("target_byte must be < 16");
  const CacheGeometry& g = p.hierarchy.l1;
  const AesModel aes(key, kAesTables);
  Machine m(p.hierarchy, p.defense, p.seed, machine_options(p));
  Rng rng(p.seed ^ stream::kWorkload);
  warm_tables(m, aes, p.hierarchy.l1.line_bytes);
  const auto lines = aes.table_lines(g.line_bytes);
  const std::uint32_t trials = aes_trials(p);
  TimingMatrix mat(256, lines.size());
  mat.row_label = "input";
  mat.col_label = "line";

  for (std::uint32_t d = 0; d < 256; ++d) {
    for (std::uint32_t t = 0; t < trials; ++t) {
      std::vector<MemOp> prog;
      for (Addr a : lines) push_chained(prog, OpKind::Flush, a);
      AesBlock pt = random_block(rng);
      pt[target_byte] = static_cast<std::uint8_t>(d);
      push_encryption(prog, aes, pt, p);
      const std::size_t first = prog.size();
      const auto order = shuffled(static_cast<std::uint32_t>(lines.size()), rng);
      for (std::uint32_t k : order) push_chained(prog, OpKind::Load, lines[k]);
      const RunResult r = m.run(prog);
      for (std::size_t k = 0; k < order.size(); ++k)
        mat.at(d, order[k]) += static_cast<double>(r.ops[first + k].latency) / trials;
    }
  }
  const std::uint32_t lines_per_table = AesModel::kTableBytes / g.line_bytes;
  auto scores = nibble_scores(mat, AesModel::table_of(target_byte) * lines_per_table);
  return finish("aes-fr", std::move(mat), std::move(scores), Direction::Min, p,
                key[target_byte] >> 4, m);
}

AttackResult run_aes_evict_time(const AttackParams& p, const AesKey& key) {
  const CacheGeometry& g = p.hierarchy.l1;
  const AesModel aes(key, kAesTables);
  Machine m(p.hierarchy, p.defense, p.seed, machine_options(p));
  Rng rng(p.seed ^ stream::kWorkload);
  warm_tables(m, aes, p.hierarchy.l1.line_bytes);
  const auto lines = aes.table_lines(g.line_bytes);
  const std::uint32_t trials = aes_trials(p);
  constexpr std::uint32_t kSwept[2] = {3, 7};
  // Set holding the last line of T4.
  const Addr victim_line = aes.table_base(3) + AesModel::kTableBytes - g.line_bytes;
  const auto target_set = static_cast<std::uint32_t>((victim_line / g.line_bytes) % g.num_sets);

  TimingMatrix mat(256, 2);
  mat.row_label = "input";
  mat.col_label = "swept_byte";
  for (std::uint32_t col = 0; col < 2; ++col) {
    for (std::uint32_t d = 0; d < 256; ++d) {
      for (std::uint32_t t = 0; t < trials; ++t) {
        std::vector<MemOp> prog;
        for (Addr a : lines) push_chained(prog, OpKind::Load, a);
        for (std::uint32_t w = 0; w < g.ways; ++w)
          push_chained(prog, OpKind::Load, congruent(kEvictBuffer, target_set, w, g));
        AesBlock pt = random_block(rng);
        pt[kSwept[col]] = static_cast<std::uint8_t>(d);
        const std::size_t first = push_encryption(prog, aes, pt, p);
        const RunResult r = m.run(prog);
        mat.at(d, col) += static_cast<double>(span(r, first, 16)) / trials;
      }
    }
  }
  auto s4 = class_scores(mat, 0);
  auto s8 = class_scores(mat, 1);
  const RecoveryVerdict v4 = recover(s4, Direction::Max, p.threshold_z);
  const RecoveryVerdict v8 = recover(s8, Direction::Max, p.threshold_z);

  AttackResult r;
  r.attack = "aes-evict-time";
  r.truth = static_cast<std::uint32_t>((key[3] ^ key[7]) >> 4);
  r.verdict.best = v4.best ^ v8.best;
  r.verdict.separation = std::min(v4.separation, v8.separation);
  if (v4.guessed && v8.guessed) r.verdict.guessed = *v4.guessed ^ *v8.guessed;
  r.verdict.correct = r.verdict.guessed && *r.verdict.guessed == r.truth;
  r.scores = s4;
  r.scores.insert(r.scores.end(), s8.begin(), s8.end());
  r.matrix = std::move(mat);
  r.metrics = m.metrics();
  r.cycles = m.now();
  return r;
}

AttackResult run_aes_collision(const AttackParams& p, const AesKey& key, std::uint32_t l1_mshrs) {
  AttackParams q = p;
  q.hierarchy.l1.mshr_entries = l1_mshrs;
  const CacheGeometry& g = q.hierarchy.l1;
  const AesModel aes(key, kAesTables);
  Machine m(q.hierarchy, q.defense, q.seed, machine_options(q));
  Rng rng(q.seed ^ stream::kWorkload);
  warm_tables(m, aes, q.hierarchy.l1.line_bytes);
  const std::uint32_t trials = aes_trials(q);

  // Cleaning pass: every way of every T1 set.
  std::vector<Addr> evict;
  for (std::uint32_t s : table_sets(aes, 0, g))
    for (std::uint32_t w = 0; w < g.ways; ++w) evict.push_back(congruent(kEvictBuffer, s, w, g));

  TimingMatrix mat(256, 1);
  mat.row_label = "d1^d5";
  mat.col_label = "time";
  for (std::uint32_t v = 0; v < 256; ++v) {
    for (std::uint32_t t = 0; t < trials; ++t) {
      std::vector<MemOp> prog;
      for (Addr a : evict) push_chained(prog, OpKind::Load, a);
      AesBlock pt = random_block(rng);
      pt[4] = static_cast<std::uint8_t>(pt[0] ^ v);
      const std::size_t first = push_encryption(prog, aes, pt, q);
      const RunResult r = m.run(prog);
      mat.at(v, 0) += static_cast<double>(span(r, first, 16)) / trials;
    }
  }
  auto scores = class_scores(mat, 0);
  return finish("aes-collision", std::move(mat), std::move(scores), Direction::Min, q,
                static_cast<std::uint32_t>((key[0] ^ key[4]) >> 4), m);
}

}  // namespace rascache
