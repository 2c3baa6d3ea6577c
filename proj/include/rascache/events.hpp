#pragma once

#include <cstdint>
#include <variant>

#include "rascache/sim_kernel.hpp"
#include "rascache/types.hpp"

namespace rascache {

enum class LevelId : std::uint8_t { L1, L2 };

namespace ev {
struct FillReturn {
  LevelId level;
  MshrId mshr;
};
struct RetryDemand {
  RequestId request;
};
struct RetryL2 {
  MshrId l1_mshr;
};
struct DemandDone {
  RequestId request;
};
struct ShbTick {};
struct IssueOp {
  std::uint32_t index;
};
struct AuthorizeOp {
  std::uint32_t index;
};
struct SquashOp {
  std::uint32_t index;
};
struct OpDone {
  std::uint32_t index;
};
}  // namespace ev

using Event = std::variant<ev::FillReturn, ev::RetryDemand, ev::RetryL2, ev::DemandDone,
                           ev::ShbTick, ev::IssueOp, ev::AuthorizeOp, ev::SquashOp, ev::OpDone>;

using Kernel = EventQueue<Event>;

}  // namespace rascache
