#include "rascache/shb.hpp"

#include <stdexcept>

namespace rascache {

SafeHistoryBuffer::SafeHistoryBuffer(std::uint32_t entries, std::uint32_t rate_cycles,
                                     std::uint32_t window_lines, std::uint32_t line_bytes,
                                     std::uint64_t seed)
    : capacity_(entries),
      rate_(rate_cycles),
      window_(window_lines),
      line_bytes_(line_bytes),
      entry_rng_(seed ^ stream::kShbEntry),
      window_rng_(seed ^ stream::kShbWindow) {
  if (entries == 0) throw std::invalid_argument("SHB entries must be >= 1");
  if (rate_cycles == 0) throw std::invalid_argument("SHB rate must be >= 1");
  if (!is_pow2(window_lines)) throw std::invalid_argument("SHB window must be a power of two");
  if (!is_pow2(line_bytes)) throw std::invalid_argument("line_bytes must be a power of two");
}

void SafeHistoryBuffer::insert(Addr addr) {
  if (entries_.size() == capacity_) entries_.pop_front();
  entries_.push_back(addr);
  ++insertions_;
}

std::optional<Addr> SafeHistoryBuffer::select_fetch_address() {
  if (entries_.empty()) return std::nullopt;
  last_entry_ = entries_[entry_rng_.rand_below(entries_.size())];
  const Addr base = window_base(last_entry_, window_, line_bytes_);
  return base + window_rng_.rand_below(window_) * line_bytes_;
}

std::optional<ShbEmission> SafeHistoryBuffer::tick(Cycle now) {
  auto fetch = select_fetch_address();
  if (!fetch) {
    ++empty_ticks_;
    return std::nullopt;
  }
  ++emissions_;
  return ShbEmission{now, last_entry_, *fetch};
}

}  // namespace rascache
