#include "rascache/workloads.hpp"

#include <charconv>
#include <deque>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace rascache {

Cycle AuthLatency::sample(Rng& rng) const {
  if (kind == Kind::Fixed || hi <= lo) return lo;
  return lo + rng.rand_below(hi - lo + 1);
}

void LocalityModel::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(name) + " must be in [0,1]");
  };
  prob(p_sequential, "p_sequential");
  prob(p_reuse, "p_reuse");
  prob(spec_fraction, "spec_fraction");
  prob(store_fraction, "store_fraction");
  prob(squash_fraction, "squash_fraction");
  if (p_sequential + p_reuse > 1.0 + 1e-12)
    throw std::invalid_argument("p_sequential + p_reuse must be <= 1");
  if (working_set_bytes < 64) throw std::invalid_argument("working_set_bytes must be >= 64");
  if (stride_bytes == 0) throw std::invalid_argument("stride_bytes must be >= 1");
  if (gap_hi < gap_lo) throw std::invalid_argument("gap_hi must be >= gap_lo");
  if (auth_latency.hi < auth_latency.lo) throw std::invalid_argument("auth_latency hi < lo");
  if (reuse_history == 0) throw std::invalid_argument("reuse_history must be >= 1");
}

TraceParseError::TraceParseError(std::size_t line, const std::string& what)
    : std::runtime_error("trace line " + std::to_string(line) + ": " + what), line_(line) {}

Trace generate_trace(const LocalityModel& model, std::size_t n, std::uint64_t seed) {
  model.validate();
  if (n == 0) throw std::invalid_argument("trace length must be >= 1");
  Rng rng(seed ^ stream::kWorkload);
  Trace out;
  out.reserve(n);
  std::deque<Addr> history;
  std::uint64_t offset = 0;  // relative to base_addr

  for (std::size_t i = 0; i < n; ++i) {
    TraceRecord r;
    if (i > 0) {
      const double u = rng.uniform();
      if (u < model.p_sequential) {
        offset = (offset + model.stride_bytes) % model.working_set_bytes;
      } else if (u < model.p_sequential + model.p_reuse && !history.empty()) {
        offset = history[rng.rand_below(history.size())];
      } else {
        offset = rng.rand_below(model.working_set_bytes / 8) * 8;
      }
    }
    r.addr = model.base_addr + offset;
    history.push_back(offset);
    if (history.size() > model.reuse_history) history.pop_front();

    r.gap = i == 0 ? 0 : model.gap_lo + rng.rand_below(model.gap_hi - model.gap_lo + 1);
    r.store = rng.uniform() < model.store_fraction;
    if (rng.uniform() < model.spec_fraction) {
      if (rng.uniform() < model.squash_fraction) r.auth_delta.reset();
      else r.auth_delta = std::max<Cycle>(1, model.auth_latency.sample(rng));
    } else {
      r.auth_delta = 0;
    }
    out.push_back(r);
  }
  return out;
}

namespace {

template <typename T>
bool parse_number(std::string_view s, T& v, int base) {
  if (base == 16 && s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) s.remove_prefix(2);
  if (s.empty()) return false;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  return ec == std::errc{} && p == s.data() + s.size();
}

}  // namespace

Trace parse_trace(std::istream& in) {
  Trace out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<std::string> f;
    for (std::string tok; fields >> tok;) f.push_back(tok);
    if (f.empty()) continue;
    if (f.size() != 4) throw TraceParseError(lineno, "expected 4 fields, got " + std::to_string(f.size()));
    TraceRecord r;
    if (!parse_number(f[0], r.gap, 10)) throw TraceParseError(lineno, "bad gap '" + f[0] + "'");
    if (f[1] == "L") r.store = false;
    else if (f[1] == "S") r.store = true;
    else throw TraceParseError(lineno, "kind must be L or S, got '" + f[1] + "'");
    if (!parse_number(f[2], r.addr, 16)) throw TraceParseError(lineno, "bad address '" + f[2] + "'");
    if (f[3] != "X") {
      Cycle d = 0;
      if (!parse_number(f[3], d, 10)) throw TraceParseError(lineno, "bad auth_delta '" + f[3] + "'");
      r.auth_delta = d;
    }
    out.push_back(r);
  }
  return out;
}

Trace parse_trace(const std::string& text) {
  std::istringstream in(text);
  return parse_trace(in);
}

Trace load_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace " + path);
  return parse_trace(in);
}

void write_trace(std::ostream& out, const Trace& trace) {
  std::ostringstream buf;
  for (const auto& r : trace) {
    buf << r.gap << ' ' << (r.store ? 'S' : 'L') << " 0x" << std::hex << r.addr << std::dec << ' ';
    if (r.auth_delta) buf << *r.auth_delta;
    else buf << 'X';
    buf << '\n';
  }
  out << buf.str();
}

std::vector<MemOp> to_program(const Trace& trace) {
  std::vector<MemOp> prog;
  prog.reserve(trace.size());
  Cycle at = 0;
  for (const auto& r : trace) {
    at += r.gap;
    MemOp op = r.store ? MemOp::store(r.addr, at) : MemOp::load(r.addr, at);
    if (r.auth_delta) op.authorize_in(static_cast<std::int64_t>(*r.auth_delta));
    else op.squash_in(kTraceSquashDelay);
    prog.push_back(op);
  }
  return prog;
}

Metrics replay(const Trace& trace, const DefenseMode& defense, const HierarchyConfig& config,
               std::uint64_t seed) {
  MachineOptions opts;
  opts.clamp_rob_order = true;
  Machine m(config, defense, seed, opts);
  m.run(to_program(trace));
  return m.metrics();
}

double miss_rate(const LevelStats& s) { return s.miss_rate(); }

NoFillReport nofill_split_report(const Metrics& m) {
  return {split_percentages(m.l1.nofill), split_percentages(m.l2.nofill)};
}

}  // namespace rascache
