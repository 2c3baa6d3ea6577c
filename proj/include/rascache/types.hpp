#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rascache {

using Cycle = std::uint64_t;
using Addr = std::uint64_t;
using RequestId = std::uint64_t;
using MshrId = std::uint32_t;

inline constexpr char kVersion[] = "0.3.1";

// Raised when the simulation itself is driven incorrectly (scheduling in the
// past, out-of-order authorization, ...). Never a normal outcome.
class SimulationError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

constexpr bool is_pow2(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

constexpr Addr line_of(Addr addr, std::uint64_t line_bytes) {
  return addr & ~(line_bytes - 1);
}

// Base of the W-line aligned region that holds `addr`.
constexpr Addr window_base(Addr addr, std::uint64_t window_lines,
                           std::uint64_t line_bytes) {
  const std::uint64_t span = window_lines * line_bytes;
  return addr - (addr % span);
}

}  // namespace rascache
