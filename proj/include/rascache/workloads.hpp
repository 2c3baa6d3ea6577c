#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rascache/hierarchy.hpp"
#include "rascache/machine.hpp"
#include "rascache/metrics.hpp"

namespace rascache {

struct AuthLatency {
  enum class Kind : std::uint8_t { Fixed, Uniform };
  Kind kind = Kind::Uniform;
  Cycle lo = 5;
  Cycle hi = 60;

  static AuthLatency fixed(Cycle c) { return {Kind::Fixed, c, c}; }
  static AuthLatency uniform(Cycle lo, Cycle hi) { return {Kind::Uniform, lo, hi}; }
  Cycle sample(Rng& rng) const;
};

struct LocalityModel {
  std::uint64_t working_set_bytes = 256u << 10;
  std::uint64_t stride_bytes = 8;
  double p_sequential = 0.6;
  double p_reuse = 0.3;  // else a uniform address in the working set
  std::uint32_t reuse_history = 64;
  double spec_fraction = 0.8;
  AuthLatency auth_latency = AuthLatency::uniform(5, 60);
  double store_fraction = 0.2;
  double squash_fraction = 0.05;  // of speculative accesses
  Cycle gap_lo = 1;
  Cycle gap_hi = 8;
  Addr base_addr = 0;

  void validate() const;
};

struct TraceRecord {
  Cycle gap = 0;  // since the previous issue
  bool store = false;
  Addr addr = 0;
  std::optional<Cycle> auth_delta;  // nullopt: squashed

  bool operator==(const TraceRecord&) const = default;
};

using Trace = std::vector<TraceRecord>;

class TraceParseError : public std::runtime_error {
 public:
  TraceParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

Trace generate_trace(const LocalityModel& model, std::size_t n, std::uint64_t seed);

// `<gap> <L|S> <hex addr> <auth_delta|X>` per line, '#' starts a comment.
Trace parse_trace(std::istream& in);
Trace parse_trace(const std::string& text);
Trace load_trace_file(const std::string& path);
void write_trace(std::ostream& out, const Trace& trace);

// Squashed records resolve this many cycles after issue.
inline constexpr std::int64_t kTraceSquashDelay = 20;
std::vector<MemOp> to_program(const Trace& trace);

Metrics replay(const Trace& trace, const DefenseMode& defense, const HierarchyConfig& config = {},
               std::uint64_t seed = 1);

double miss_rate(const LevelStats& s);

struct NoFillReport {
  NoFillSplitReport l1;
  NoFillSplitReport l2;
};
NoFillReport nofill_split_report(const Metrics& m);

}  // namespace rascache
