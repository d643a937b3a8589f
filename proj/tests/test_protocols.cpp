#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "qeth/delay.hpp"
#include "qeth/protocols.hpp"
#include "qeth/sim.hpp"

using namespace qeth;
using namespace qeth::proto;

namespace {

MacAddress mac(std::uint8_t n) { return {2, 0, 0, 0, 0, n}; }

NodeConfig switch_cfg(std::size_t ports) {
  NodeConfig c;
  c.name = "sw";
  c.mac = mac(100);
  c.ports.assign(ports, PortConfig{});
  return c;
}

QpFrame frame(MessageType t, MacAddress src, MacAddress dst, std::uint64_t e2e = 0) {
  QpFrame f;
  f.eth.src_mac = src;
  f.eth.dst_mac = dst;
  f.qp.msg_type = t;
  f.qp.seq = 77;
  f.qp.e2e_id = e2e;
  return f;
}

std::vector<std::size_t> frame_ports(const Outputs& out) {
  std::vector<std::size_t> ports;
  for (const auto& o : out)
    if (auto* f = std::get_if<FrameOut>(&o)) ports.push_back(f->port);
  return ports;
}

template <class T>
std::vector<T> all_of_kind(const Outputs& out) {
  std::vector<T> v;
  for (const auto& o : out)
    if (auto* x = std::get_if<T>(&o)) v.push_back(*x);
  return v;
}

LinkParams quiet_link() {
  LinkParams p;
  p.length_km = 10;
  p.processing_s = 1e-6;
  p.backoff_s = 1e-5;
  return p;
}

sim::SimParams quiet_params(double p_swap = 1.0) {
  sim::SimParams p;
  p.p_swap = p_swap;
  p.refractive_index = 1.468;
  return p;
}

std::size_t count_notify(const sim::RunResult& r, NotifyKind k) {
  return static_cast<std::size_t>(std::count_if(r.notifications.begin(), r.notifications.end(),
                                                [&](const sim::NotifyRecord& n) { return n.kind == k; }));
}

}  // namespace

TEST_CASE("switch floods unknown destinations on forwarding quantum ports") {
  NodeConfig cfg = switch_cfg(4);
  cfg.ports[2].quantum = false;     // classical-only port
  cfg.ports[3].forwarding = false;  // blocked by Q-STP
  Node n(cfg);
  const auto out = n.step(0, FrameIn{0, frame(MessageType::DiscoveryRequest, mac(1), mac(2))});
  CHECK(frame_ports(out) == std::vector<std::size_t>{1});
  CHECK(n.state().mac_table.at(mac(1)).port == 0);
}

TEST_CASE("learned addresses are unicast, never back out the ingress port") {
  Node n(switch_cfg(3));
  n.step(0, FrameIn{0, frame(MessageType::DiscoveryRequest, mac(1), mac(2))});
  const auto back = n.step(1, FrameIn{2, frame(MessageType::DiscoveryReply, mac(2), mac(1))});
  CHECK(frame_ports(back) == std::vector<std::size_t>{0});
  // A looped copy arriving on the learned port itself is dropped.
  CHECK(frame_ports(n.step(2, FrameIn{0, frame(MessageType::DiscoveryReply, mac(5), mac(1))})).empty());
}

TEST_CASE("forwarded frames get a fresh sequence number, payload untouched") {
  Node n(switch_cfg(2));
  QpFrame f = frame(MessageType::DiscoveryRequest, mac(1), mac(2));
  f.qp.seq = 9999;
  const auto out = all_of_kind<FrameOut>(n.step(0, FrameIn{0, f}));
  REQUIRE(out.size() == 1);
  CHECK(out[0].frame.qp.seq != 9999);
  CHECK(out[0].frame.eth.src_mac == mac(1));
  CHECK(out[0].frame.eth.dst_mac == mac(2));
}

TEST_CASE("frames for another node and frames on blocked ports are dropped") {
  NodeConfig cfg = switch_cfg(2);
  cfg.ports[1].forwarding = false;
  Node n(cfg);
  CHECK(n.step(0, FrameIn{0, frame(MessageType::KeepAlive, mac(1), mac(3), 5)}).empty());
  CHECK(n.step(0, FrameIn{1, frame(MessageType::DiscoveryRequest, mac(1), mac(3))}).empty());
  CHECK(n.state().mac_table.empty());  // nothing learned from dropped frames
}

TEST_CASE("target user answers discovery with a reply to the sender") {
  NodeConfig cfg;
  cfg.name = "bob";
  cfg.mac = mac(2);
  cfg.is_switch = false;
  cfg.ports.assign(1, PortConfig{});
  Node bob(cfg);
  const auto out = all_of_kind<FrameOut>(bob.step(0, FrameIn{0, frame(MessageType::DiscoveryRequest, mac(1), mac(2))}));
  REQUIRE(out.size() == 1);
  CHECK(out[0].frame.qp.msg_type == MessageType::DiscoveryReply);
  CHECK(out[0].frame.qp.ack_flag);
  CHECK(out[0].frame.qp.ack_seq == 77);
  CHECK(out[0].frame.eth.dst_mac == mac(1));
}

TEST_CASE("a reused circuit identifier is refused") {
  Node n(switch_cfg(2));
  Circuit c;
  c.e2e_id = 42;
  n.mutable_state().entanglement_table[42] = c;
  const auto out = all_of_kind<FrameOut>(n.step(0, FrameIn{0, frame(MessageType::EstablishmentRequest, mac(1), mac(2), 42)}));
  REQUIRE(out.size() == 1);
  CHECK(out[0].frame.qp.msg_type == MessageType::EstablishmentInterrupted);
  CHECK(out[0].port == 0);
}

TEST_CASE("token faults") {
  NodeConfig cfg = switch_cfg(2);
  Node n(cfg);
  Circuit c;
  c.e2e_id = 7;
  c.index = 2;
  c.switches = 4;
  c.established = true;
  c.left.port = 0;
  c.right.port = 1;
  c.left.peer = mac(1);
  c.right.peer = mac(3);

  auto deliver_transfer = [&](std::uint8_t level) {
    QpFrame t = frame(MessageType::TokenTransfer, mac(1), cfg.mac, 7);
    t.qp.token_id = token_id_for(7, Direction::FromLeft);
    t.qp.level = level;
    const auto acks = all_of_kind<FrameOut>(n.step(0, FrameIn{0, t}));
    REQUIRE(acks.size() == 1);
    CHECK(acks[0].frame.qp.msg_type == MessageType::TokenAck);
    return all_of_kind<Fault>(n.step(1e-3, FrameDelivered{0, acks[0].frame}));
  };

  SUBCASE("second token from the same side conflicts") {
    c.left_token = Token{token_id_for(7, Direction::FromLeft), Direction::FromLeft, 1};
    n.mutable_state().entanglement_table[7] = c;
    const auto faults = deliver_transfer(2);
    REQUIRE(faults.size() == 1);
    CHECK(faults[0].kind == FaultKind::TokenConflict);
  }
  SUBCASE("level above V overflows") {
    n.mutable_state().entanglement_table[7] = c;
    const auto faults = deliver_transfer(9);
    REQUIRE(faults.size() == 1);
    CHECK(faults[0].kind == FaultKind::LevelOverflow);
  }
  SUBCASE("valid token is received") {
    n.mutable_state().entanglement_table[7] = c;
    CHECK(deliver_transfer(2).empty());
    CHECK(n.state().entanglement_table.at(7).left_token->level == 2);
  }
}

TEST_CASE("S = 0 and S = 1 complete") {
  for (std::size_t s : {0u, 1u}) {
    const auto spec = sim::chain_spec(s, quiet_link(), quiet_params());
    const auto r = sim::run_protocol(spec, 1);
    CHECK(r.completed);
    CHECK(count_notify(r, NotifyKind::EntanglementReady) == 2);
    CHECK(r.frames_by_type[static_cast<std::size_t>(MessageType::SwappingError)] == 0);
  }
}

TEST_CASE("noiseless S = 2 swap takes t_tq + 11 t_req") {
  const LinkParams l = quiet_link();
  const auto spec = sim::chain_spec(2, l, quiet_params());
  const auto r = sim::run_protocol(spec, 1);
  REQUIRE(r.completed);
  const double req = t_req(l, {}, 1.468);
  const double tq = t_tq(l, 1, 1.468);
  CHECK(r.swap_protocol_s == doctest::Approx(tq + 11 * req).epsilon(1e-9));
}

TEST_CASE("failure-free maximum level is floor(S/2) + 1") {
  for (std::size_t s = 2; s <= 12; ++s) {
    CAPTURE(s);
    const auto r = sim::run_protocol(sim::chain_spec(s, quiet_link(), quiet_params()), 3);
    REQUIRE(r.completed);
    CHECK(r.max_level == s / 2 + 1);
    CHECK(r.faults.empty());
  }
}

TEST_CASE("a failed swap at level v sends v + 1 SwappingError frames") {
  for (std::size_t s : {4u, 6u, 8u}) {
    const std::size_t V = s / 2 + 1;
    for (std::uint8_t v = 1; v < V; ++v) {
      CAPTURE(s);
      CAPTURE(int(v));
      bool fired = false;
      sim::Hooks h;
      h.swap_oracle = [&](std::size_t, std::uint8_t level) -> std::optional<bool> {
        if (level == v && !fired) {
          fired = true;
          return false;
        }
        return true;
      };
      const auto r = sim::run_protocol(sim::chain_spec(s, quiet_link(), quiet_params()), 1, h);
      CHECK(fired);
      CHECK(r.completed);
      CHECK(r.frames_by_type[static_cast<std::size_t>(MessageType::SwappingError)] == v + 1u);
      CHECK(r.frames_by_type[static_cast<std::size_t>(MessageType::ErrorAck)] == v + 1u);
    }
  }
}

TEST_CASE("a dead link interrupts the circuit through keep-alives") {
  const auto spec = sim::chain_spec(3, quiet_link(), quiet_params());
  sim::Hooks h;
  h.swap_oracle = [](std::size_t, std::uint8_t) -> std::optional<bool> { return false; };
  h.link_kills = {{0.01, 2}};  // sw2 - sw3
  const auto r = sim::run_protocol(spec, 1, h);
  CHECK_FALSE(r.completed);
  CHECK(count_notify(r, NotifyKind::EstablishmentComplete) == 2);
  CHECK(count_notify(r, NotifyKind::EstablishmentInterrupted) >= 1);
  CHECK(r.total_s < 1.0);
}

TEST_CASE("swap outcomes follow P_swap and every run finishes") {
  LinkParams l = quiet_link();
  l.collision_prob = 0.1;
  l.bit_error_prob = 1e-4;
  l.qubit_loss_prob = 0.5;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto r = sim::run_protocol(sim::chain_spec(4, l, quiet_params(0.5)), seed);
    CHECK(r.completed);
    CHECK(r.faults.empty());
  }
}

TEST_CASE("trace is reproducible") {
  LinkParams l = quiet_link();
  l.collision_prob = 0.2;
  const auto spec = sim::chain_spec(3, l, quiet_params(0.7));
  auto trace_of = [&](std::uint64_t seed) {
    std::string t;
    sim::Hooks h;
    h.trace = [&](const std::string& line) { t += line + "\n"; };
    sim::run_protocol(spec, seed, h);
    return t;
  };
  const std::string a = trace_of(5);
  CHECK(a == trace_of(5));
  CHECK(a != trace_of(6));
  CHECK(a.find("msg=SwappingComplete") != std::string::npos);
}
