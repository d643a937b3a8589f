#include "qeth/trace.hpp"

#include <cstdio>

namespace qeth {

std::string format_trace(const TraceEvent& e) {
  char head[160];
  std::snprintf(head, sizeof head, "t=%.9e node=%s ev=%s", e.t, e.node.c_str(), e.kind.c_str());
  std::string s = head;
  if (e.port) s += " port=" + std::to_string(*e.port);
  if (e.frame) {
    const QpFrame& f = *e.frame;
    char body[160];
    std::snprintf(body, sizeof body, " seq=%u msg=%s e2e=%016llx level=%u token=%u", f.qp.seq,
                  std::string(to_string(f.qp.msg_type)).c_str(),
                  static_cast<unsigned long long>(f.qp.e2e_id), f.qp.level, f.qp.token_id);
    s += body;
    if (!e.detail.empty()) s += " " + e.detail;
    const FrameBytes raw = encode_frame(f);
    s += "\n";
    s += to_hex(raw);
    return s;
  }
  char e2e[32];
  std::snprintf(e2e, sizeof e2e, " e2e=%016llx", static_cast<unsigned long long>(e.e2e_id));
  s += e2e;
  if (!e.detail.empty()) s += " " + e.detail;
  return s;
}

}  // namespace qeth
