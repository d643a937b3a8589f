#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "qeth/codec.hpp"

namespace qeth {

/// One trace record. Frame events print
///   t=<s> node=<name> ev=<kind> port=<id> seq=<n> msg=<type> e2e=<hex> level=<v> token=<id>
/// followed by a second line holding the raw frame as lowercase hex.
struct TraceEvent {
  double t = 0.0;
  std::string node;
  std::string kind;  // tx, rx, drop, corrupt, qtx, qrx, swap, notify, token, fault, timer
  std::optional<std::size_t> port;
  std::optional<QpFrame> frame;
  std::uint64_t e2e_id = 0;
  std::string detail;  // free text for non-frame events
};

std::string format_trace(const TraceEvent& e);

}  // namespace qeth
