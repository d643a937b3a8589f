#include "qeth/protocols.hpp"

#include <algorithm>

namespace qeth::proto {

std::string_view to_string(NotifyKind k) {
  switch (k) {
    case NotifyKind::DiscoveryComplete: return "DiscoveryComplete";
    case NotifyKind::DiscoveryFailed: return "DiscoveryFailed";
    case NotifyKind::EstablishmentComplete: return "EstablishmentComplete";
    case NotifyKind::EstablishmentTimeout: return "EstablishmentTimeout";
    case NotifyKind::EstablishmentInterrupted: return "EstablishmentInterrupted";
    case NotifyKind::EntanglementReady: return "EntanglementReady";
  }
  return "?";
}

std::string_view to_string(FaultKind k) {
  switch (k) {
    case FaultKind::TokenConflict: return "TokenConflict";
    case FaultKind::LevelOverflow: return "LevelOverflow";
  }
  return "?";
}

std::string_view to_string(TokenChange c) {
  switch (c) {
    case TokenChange::Created: return "Created";
    case TokenChange::Transferred: return "Transferred";
    case TokenChange::Received: return "Received";
    case TokenChange::Destroyed: return "Destroyed";
    case TokenChange::Consumed: return "Consumed";
  }
  return "?";
}

std::string_view to_string(PtpPhase p) {
  switch (p) {
    case PtpPhase::Idle: return "Idle";
    case PtpPhase::RequestSent: return "RequestSent";
    case PtpPhase::ReplySent: return "ReplySent";
    case PtpPhase::AwaitQubits: return "AwaitQubits";
    case PtpPhase::QubitsSent: return "QubitsSent";
    case PtpPhase::AckSent: return "AckSent";
    case PtpPhase::Ready: return "Ready";
    case PtpPhase::Consumed: return "Consumed";
  }
  return "?";
}

std::uint16_t token_id_for(std::uint64_t e2e_id, Direction d) {
  return static_cast<std::uint16_t>((e2e_id << 1) | static_cast<std::uint16_t>(d));
}

Direction token_direction(std::uint16_t token_id) {
  return (token_id & 1u) ? Direction::FromRight : Direction::FromLeft;
}

namespace {

enum class Role { Left, Center, Right };

Role role_of(const Circuit& c) {
  if (c.index < c.center()) return Role::Left;
  if (c.index > c.center()) return Role::Right;
  return Role::Center;
}

bool expects_ack(MessageType t) {
  switch (t) {
    case MessageType::DiscoveryRequest:
    case MessageType::EstablishmentRequest:
    case MessageType::PtpEntanglementRequest:
    case MessageType::SwappingRequest:
    case MessageType::SwappingError:
    case MessageType::TokenTransfer:
    case MessageType::SwappingComplete: return true;
    default: return false;
  }
}

struct FrameSpec {
  MessageType type;
  std::uint64_t e2e = 0;
  std::uint8_t level = 0;
  std::uint16_t token = 0;
  std::uint16_t payload = 0;
  std::optional<std::uint32_t> ack_of;
};

QpFrame make_frame(NodeState& s, const NodeConfig& cfg, const MacAddress& dst, const FrameSpec& f) {
  QpFrame fr;
  fr.eth.dst_mac = dst;
  fr.eth.src_mac = cfg.mac;
  fr.eth.payload_len = f.payload;
  fr.qp.seq = s.next_seq++;
  fr.qp.msg_type = f.type;
  fr.qp.e2e_id = f.e2e;
  fr.qp.level = f.level;
  fr.qp.token_id = f.token;
  if (f.ack_of) {
    fr.qp.ack_flag = true;
    fr.qp.ack_seq = *f.ack_of;
  }
  return fr;
}

std::uint32_t send(NodeState& s, const NodeConfig& cfg, Outputs& out, std::size_t port,
                   const MacAddress& dst, const FrameSpec& f) {
  QpFrame fr = make_frame(s, cfg, dst, f);
  if (expects_ack(f.type)) s.pending_acks[fr.qp.seq] = f.type;
  out.emplace_back(FrameOut{port, fr});
  return fr.qp.seq;
}

void reply(NodeState& s, const NodeConfig& cfg, Outputs& out, std::size_t port, const QpFrame& req,
           MessageType type, std::uint16_t payload = 0) {
  send(s, cfg, out, port, req.eth.src_mac,
       {type, req.qp.e2e_id, req.qp.level, req.qp.token_id, payload, req.qp.seq});
}

/// Re-sends a transit frame unchanged except for the sequence number.
void forward(NodeState& s, Outputs& out, std::size_t port, QpFrame fr) {
  fr.qp.seq = s.next_seq++;
  out.emplace_back(FrameOut{port, fr});
}

std::optional<std::size_t> user_port(const NodeConfig& cfg) {
  for (std::size_t p = 0; p < cfg.ports.size(); ++p)
    if (cfg.ports[p].quantum && cfg.ports[p].forwarding) return p;
  return std::nullopt;
}

Circuit* find_circuit(NodeState& s, std::uint64_t e2e) {
  auto it = s.entanglement_table.find(e2e);
  return it == s.entanglement_table.end() ? nullptr : &it->second;
}

CircuitSide* side_at(Circuit& c, std::size_t port, bool* is_left = nullptr) {
  // Left is checked first; S = 0 circuits at users only ever have one port.
  if (c.left.port && *c.left.port == port) {
    if (is_left) *is_left = true;
    return &c.left;
  }
  if (c.right.port && *c.right.port == port) {
    if (is_left) *is_left = false;
    return &c.right;
  }
  return nullptr;
}

void token_event(Outputs& out, TokenChange ch, const Token& t) {
  out.emplace_back(TokenEvent{ch, t.direction, t.level, t.token_id});
}

void create_token(Circuit& c, Direction d, Outputs& out) {
  Token t{token_id_for(c.e2e_id, d), d, 0};
  (d == Direction::FromLeft ? c.left_token : c.right_token) = t;
  token_event(out, TokenChange::Created, t);
}

void start_ptp(NodeState& s, const NodeConfig& cfg, Circuit& c, Outputs& out) {
  CircuitSide& r = c.right;
  if (!r.port || !r.initiator || r.phase != PtpPhase::Idle) return;
  r.handshake_seq = send(s, cfg, out, *r.port, r.peer,
                         {MessageType::PtpEntanglementRequest, c.e2e_id, 0, 0,
                          static_cast<std::uint16_t>(cfg.protocol.qubits)});
  r.phase = PtpPhase::RequestSent;
}

void reset_sides(Circuit& c) {
  c.left.phase = PtpPhase::Idle;
  c.right.phase = PtpPhase::Idle;
  c.left_token.reset();
  c.right_token.reset();
  c.incoming = {};
  c.swap_pending = false;
}

void drop_circuit(NodeState& s, const NodeConfig& cfg, std::uint64_t e2e) {
  s.entanglement_table.erase(e2e);
  if (!cfg.is_switch && s.session.e2e_id == e2e) s.session.phase = SessionPhase::Failed;
}

/// Tear a circuit down and tell both neighbours.
void interrupt(NodeState& s, const NodeConfig& cfg, Circuit& c, Outputs& out,
               std::optional<std::size_t> skip_port = std::nullopt) {
  const std::uint64_t e2e = c.e2e_id;
  for (const CircuitSide* side : {&c.left, &c.right})
    if (side->port && side->port != skip_port)
      send(s, cfg, out, *side->port, side->peer, {MessageType::EstablishmentInterrupted, e2e});
  if (!cfg.is_switch) out.emplace_back(NotifyUser{NotifyKind::EstablishmentInterrupted, e2e});
  drop_circuit(s, cfg, e2e);
}

void try_swap(NodeState& s, const NodeConfig& cfg, Circuit& c, Outputs& out) {
  if (!cfg.is_switch || !c.established || c.swap_pending || c.complete) return;
  if (c.left.phase != PtpPhase::Ready || c.right.phase != PtpPhase::Ready) return;
  switch (role_of(c)) {
    case Role::Left:
      if (!c.left_token) return;
      send(s, cfg, out, *c.right.port, c.right.peer,
           {MessageType::SwappingRequest, c.e2e_id, static_cast<std::uint8_t>(c.left_token->level + 1),
            c.left_token->token_id});
      break;
    case Role::Right:
      if (!c.right_token) return;
      send(s, cfg, out, *c.left.port, c.left.peer,
           {MessageType::SwappingRequest, c.e2e_id, static_cast<std::uint8_t>(c.right_token->level + 1),
            c.right_token->token_id});
      break;
    case Role::Center:
      // Both tokens meet here; the final swap needs no request.
      if (!c.left_token || !c.right_token) return;
      out.emplace_back(SwapAttempt{
          c.e2e_id, static_cast<std::uint8_t>(std::max(c.left_token->level, c.right_token->level) + 1)});
      break;
  }
  c.swap_pending = true;
}

void pair_ready(NodeState& s, const NodeConfig& cfg, Circuit& c, Outputs& out) {
  // Direct link between the users: the pair itself is the result.
  if (!cfg.is_switch && c.switches == 0 && c.established) {
    c.complete = true;
    s.session.phase = SessionPhase::Ready;
    out.emplace_back(NotifyUser{NotifyKind::EntanglementReady, c.e2e_id});
    return;
  }
  try_swap(s, cfg, c, out);
}

// ---------------------------------------------------------------------------

bool on_discovery_frame(NodeState& s, const NodeConfig& cfg, const FrameIn& in, Outputs& out) {
  const QpFrame& f = in.frame;
  if (f.qp.msg_type != MessageType::DiscoveryRequest && f.qp.msg_type != MessageType::DiscoveryReply)
    return false;

  if (f.eth.dst_mac == cfg.mac) {
    if (f.qp.msg_type == MessageType::DiscoveryRequest) {
      reply(s, cfg, out, in.port, f, MessageType::DiscoveryReply);
    } else if (!cfg.is_switch && s.session.phase == SessionPhase::Discovering &&
               f.eth.src_mac == s.session.target) {
      s.session.phase = SessionPhase::Discovered;
      out.emplace_back(NotifyUser{NotifyKind::DiscoveryComplete, 0});
    }
    return true;
  }
  if (!cfg.is_switch) return true;

  auto known = s.mac_table.find(f.eth.dst_mac);
  if (known != s.mac_table.end()) {
    if (known->second.port != in.port) forward(s, out, known->second.port, f);
    return true;
  }
  for (std::size_t p = 0; p < cfg.ports.size(); ++p)
    if (p != in.port && cfg.ports[p].quantum && cfg.ports[p].forwarding) forward(s, out, p, f);
  return true;
}

}  // namespace

bool discovery_step(NodeState& s, const NodeConfig& cfg, double, const Input& in, Outputs& out) {
  if (auto* f = std::get_if<FrameIn>(&in)) return on_discovery_frame(s, cfg, *f, out);

  if (auto* d = std::get_if<StartDiscovery>(&in)) {
    if (cfg.is_switch) return true;
    auto port = user_port(cfg);
    s.session.target = d->target;
    s.session.phase = SessionPhase::Discovering;
    ++s.session.generation;
    if (!port) {
      s.session.phase = SessionPhase::Failed;
      out.emplace_back(NotifyUser{NotifyKind::DiscoveryFailed, 0});
      return true;
    }
    send(s, cfg, out, *port, d->target, {MessageType::DiscoveryRequest});
    out.emplace_back(
        StartTimer{TimerKind::DiscoveryTimeout, cfg.protocol.discovery_timeout_s, 0, s.session.generation});
    return true;
  }

  if (auto* t = std::get_if<TimerExpired>(&in); t && t->kind == TimerKind::DiscoveryTimeout) {
    if (s.session.phase == SessionPhase::Discovering && t->generation == s.session.generation) {
      s.session.phase = SessionPhase::Failed;
      out.emplace_back(NotifyUser{NotifyKind::DiscoveryFailed, 0});
    }
    return true;
  }
  return false;
}

// ---------------------------------------------------------------------------

namespace {

void arm_keepalive(const NodeConfig& cfg, Circuit& c, Outputs& out) {
  if (!cfg.is_switch || !cfg.protocol.keepalive) return;
  out.emplace_back(StartTimer{TimerKind::KeepAliveTick, cfg.protocol.keepalive_period_s, c.e2e_id,
                              ++c.keepalive_generation});
}

void setup_roles(Circuit& c) {
  const std::size_t S = c.switches;
  c.right.initiator = c.right.port.has_value();
  c.left.initiator = false;
  // On a single-switch chain the switch sources the Alice link.
  c.right.source = c.right.port && !(S == 1 && c.index == 0);
  c.left.source = c.left.port && S == 1 && c.index == 1;
  c.left.monitor = c.index >= 2 && c.index <= S;
  c.right.monitor = c.index >= 1 && c.index < S;
}

bool on_establish_frame(NodeState& s, const NodeConfig& cfg, double now, const FrameIn& in,
                        Outputs& out) {
  const QpFrame& f = in.frame;
  switch (f.qp.msg_type) {
    case MessageType::EstablishmentRequest: {
      if (s.entanglement_table.count(f.qp.e2e_id)) {
        // StaleCircuit: the identifier is already in use here.
        send(s, cfg, out, in.port, f.eth.src_mac, {MessageType::EstablishmentInterrupted, f.qp.e2e_id});
        return true;
      }
      if (f.eth.dst_mac == cfg.mac) {
        if (cfg.is_switch) return true;
        Circuit c;
        c.e2e_id = f.qp.e2e_id;
        c.switches = f.qp.level;
        c.index = c.switches + 1;
        c.left.port = in.port;
        c.left.peer = f.eth.src_mac;
        c.established = true;
        setup_roles(c);
        s.entanglement_table[c.e2e_id] = c;
        s.session.e2e_id = c.e2e_id;
        s.session.phase = SessionPhase::Established;
        send(s, cfg, out, in.port, f.eth.src_mac,
             {MessageType::EstablishmentReply, f.qp.e2e_id, f.qp.level, 0, 0, f.qp.seq});
        out.emplace_back(NotifyUser{NotifyKind::EstablishmentComplete, c.e2e_id});
        return true;
      }
      if (!cfg.is_switch) return true;
      auto route = s.mac_table.find(f.eth.dst_mac);
      if (route == s.mac_table.end() || route->second.port == in.port) return true;  // not discovered
      Circuit c;
      c.e2e_id = f.qp.e2e_id;
      c.index = static_cast<std::size_t>(f.qp.level) + 1;
      c.left.port = in.port;
      c.left.peer = f.eth.src_mac;
      c.right.port = route->second.port;
      s.entanglement_table[c.e2e_id] = c;
      QpFrame next = f;
      next.eth.src_mac = cfg.mac;
      next.qp.level = static_cast<std::uint8_t>(f.qp.level + 1);
      next.qp.seq = s.next_seq++;
      s.pending_acks[next.qp.seq] = MessageType::EstablishmentRequest;
      out.emplace_back(FrameOut{route->second.port, next});
      return true;
    }

    case MessageType::EstablishmentReply: {
      Circuit* c = find_circuit(s, f.qp.e2e_id);
      if (!c || c->established) return true;
      c->switches = f.qp.level;
      c->right.port = in.port;
      c->right.peer = f.eth.src_mac;
      c->established = true;
      setup_roles(*c);
      c->left.last_keepalive_s = now;
      c->right.last_keepalive_s = now;
      if (cfg.is_switch) {
        send(s, cfg, out, *c->left.port, c->left.peer,
             {MessageType::EstablishmentReply, c->e2e_id, f.qp.level, 0, 0, f.qp.seq});
        if (c->index == 1) create_token(*c, Direction::FromLeft, out);
        if (c->index == c->switches) create_token(*c, Direction::FromRight, out);
        arm_keepalive(cfg, *c, out);
      } else {
        s.session.phase = SessionPhase::Established;
        out.emplace_back(NotifyUser{NotifyKind::EstablishmentComplete, c->e2e_id});
      }
      start_ptp(s, cfg, *c, out);
      return true;
    }

    case MessageType::EstablishmentInterrupted: {
      Circuit* c = find_circuit(s, f.qp.e2e_id);
      if (!c) {
        if (!cfg.is_switch && s.session.e2e_id == f.qp.e2e_id &&
            s.session.phase == SessionPhase::Establishing) {
          s.session.phase = SessionPhase::Failed;
          out.emplace_back(NotifyUser{NotifyKind::EstablishmentInterrupted, f.qp.e2e_id});
        }
        return true;
      }
      interrupt(s, cfg, *c, out, in.port);
      return true;
    }

    case MessageType::KeepAlive: {
      if (Circuit* c = find_circuit(s, f.qp.e2e_id))
        if (CircuitSide* side = side_at(*c, in.port)) side->last_keepalive_s = now;
      return true;
    }

    default: return false;
  }
}

}  // namespace

bool establish_step(NodeState& s, const NodeConfig& cfg, double now, const Input& in, Outputs& out) {
  if (auto* f = std::get_if<FrameIn>(&in)) return on_establish_frame(s, cfg, now, *f, out);

  if (auto* e = std::get_if<StartEstablishment>(&in)) {
    if (cfg.is_switch) return true;
    auto port = user_port(cfg);
    s.session.target = e->target;
    s.session.e2e_id = e->e2e_id;
    ++s.session.generation;
    if (!port || s.entanglement_table.count(e->e2e_id)) {
      s.session.phase = SessionPhase::Failed;
      out.emplace_back(NotifyUser{NotifyKind::EstablishmentInterrupted, e->e2e_id});
      return true;
    }
    s.session.phase = SessionPhase::Establishing;
    Circuit c;
    c.e2e_id = e->e2e_id;
    c.index = 0;
    s.entanglement_table[c.e2e_id] = c;
    send(s, cfg, out, *port, e->target, {MessageType::EstablishmentRequest, e->e2e_id, 0});
    out.emplace_back(StartTimer{TimerKind::EstablishmentTimeout, cfg.protocol.establishment_timeout_s,
                                e->e2e_id, s.session.generation});
    return true;
  }

  if (auto* t = std::get_if<TimerExpired>(&in)) {
    if (t->kind == TimerKind::EstablishmentTimeout) {
      if (s.session.phase == SessionPhase::Establishing && t->generation == s.session.generation &&
          s.session.e2e_id == t->e2e_id) {
        s.entanglement_table.erase(t->e2e_id);
        s.session.phase = SessionPhase::Failed;
        out.emplace_back(NotifyUser{NotifyKind::EstablishmentTimeout, t->e2e_id});
      }
      return true;
    }
    if (t->kind == TimerKind::KeepAliveTick) {
      Circuit* c = find_circuit(s, t->e2e_id);
      if (!c || c->complete || t->generation != c->keepalive_generation) return true;
      const double limit = cfg.protocol.keepalive_miss_limit * cfg.protocol.keepalive_period_s;
      for (CircuitSide* side : {&c->left, &c->right}) {
        if (side->monitor && now - side->last_keepalive_s > limit + 1e-12) {
          interrupt(s, cfg, *c, out, side->port);
          return true;
        }
      }
      for (const CircuitSide* side : {&c->left, &c->right})
        if (side->monitor) send(s, cfg, out, *side->port, side->peer, {MessageType::KeepAlive, c->e2e_id});
      arm_keepalive(cfg, *c, out);
      return true;
    }
    return false;
  }

  if (auto* q = std::get_if<QubitDeliveryFailed>(&in)) {
    if (Circuit* c = find_circuit(s, q->e2e_id)) interrupt(s, cfg, *c, out);
    return true;
  }
  return false;
}

// ---------------------------------------------------------------------------

namespace {

bool on_ptp_frame(NodeState& s, const NodeConfig& cfg, const FrameIn& in, Outputs& out) {
  const QpFrame& f = in.frame;
  if (f.qp.msg_type != MessageType::PtpEntanglementRequest &&
      f.qp.msg_type != MessageType::PtpEntanglementReply)
    return false;
  Circuit* c = find_circuit(s, f.qp.e2e_id);
  if (!c || !c->established) return true;
  bool left = false;
  CircuitSide* side = side_at(*c, in.port, &left);
  if (!side) return true;

  if (f.qp.msg_type == MessageType::PtpEntanglementRequest) {
    bool restart_right = false;
    if (cfg.is_switch && left && c->left.phase == PtpPhase::Consumed &&
        c->right.phase == PtpPhase::Consumed) {
      // Idle switch pulled back in after a failure further left.
      reset_sides(*c);
      c->complete = false;
      if (c->index == c->switches) create_token(*c, Direction::FromRight, out);
      restart_right = true;
    }
    // A new exchange replaces whatever pair this side held.
    side->handshake_seq = f.qp.seq;
    reply(s, cfg, out, in.port, f, MessageType::PtpEntanglementReply, f.eth.payload_len);
    side->phase = side->source ? PtpPhase::ReplySent : PtpPhase::AwaitQubits;
    if (restart_right) start_ptp(s, cfg, *c, out);
    return true;
  }

  // PtpEntanglementReply: handshake answer or qubit-receipt ack.
  if (side->phase == PtpPhase::RequestSent && f.qp.ack_seq == side->handshake_seq) {
    if (side->source) {
      out.emplace_back(QubitPacketOut{in.port, c->e2e_id, f.eth.payload_len});
      side->phase = PtpPhase::QubitsSent;
    } else {
      side->phase = PtpPhase::AwaitQubits;
    }
  } else if (side->phase == PtpPhase::QubitsSent) {
    side->phase = PtpPhase::Ready;
    pair_ready(s, cfg, *c, out);
  }
  return true;
}

bool on_ptp_delivered(NodeState& s, const NodeConfig& cfg, const FrameDelivered& d, Outputs& out) {
  const QpFrame& f = d.frame;
  if (f.qp.msg_type != MessageType::PtpEntanglementReply) return false;
  Circuit* c = find_circuit(s, f.qp.e2e_id);
  if (!c) return true;
  CircuitSide* side = side_at(*c, d.port);
  if (!side) return true;
  if (side->phase == PtpPhase::ReplySent) {
    out.emplace_back(QubitPacketOut{d.port, c->e2e_id, f.eth.payload_len});
    side->phase = PtpPhase::QubitsSent;
  } else if (side->phase == PtpPhase::AckSent) {
    side->phase = PtpPhase::Ready;
    pair_ready(s, cfg, *c, out);
  }
  return true;
}

}  // namespace

bool ptp_step(NodeState& s, const NodeConfig& cfg, double, const Input& in, Outputs& out) {
  if (auto* f = std::get_if<FrameIn>(&in)) return on_ptp_frame(s, cfg, *f, out);
  if (auto* d = std::get_if<FrameDelivered>(&in)) return on_ptp_delivered(s, cfg, *d, out);
  if (auto* q = std::get_if<QubitPacketIn>(&in)) {
    Circuit* c = find_circuit(s, q->e2e_id);
    if (!c) return true;
    CircuitSide* side = side_at(*c, q->port);
    if (!side || side->phase != PtpPhase::AwaitQubits || q->received == 0) return true;
    send(s, cfg, out, q->port, side->peer,
         {MessageType::PtpEntanglementReply, c->e2e_id, 0, 0, static_cast<std::uint16_t>(q->received),
          side->handshake_seq});
    side->phase = PtpPhase::AckSent;
    return true;
  }
  return false;
}

// ---------------------------------------------------------------------------

namespace {

void send_error(NodeState& s, const NodeConfig& cfg, Outputs& out, const CircuitSide& side,
                std::uint64_t e2e, std::uint8_t level, std::uint16_t token) {
  if (side.port) send(s, cfg, out, *side.port, side.peer, {MessageType::SwappingError, e2e, level, token});
}

void swap_failed(NodeState& s, const NodeConfig& cfg, Circuit& c, Outputs& out) {
  const Role r = role_of(c);
  const Token& held = r == Role::Right ? *c.right_token : *c.left_token;
  std::uint8_t level = static_cast<std::uint8_t>(held.level + 1);
  std::uint16_t token = held.token_id;
  if (r == Role::Center) {
    level = static_cast<std::uint8_t>(std::max(c.left_token->level, c.right_token->level) + 1);
    token = c.left_token->token_id;
    token_event(out, TokenChange::Destroyed, *c.right_token);
  }
  token_event(out, TokenChange::Destroyed, held);

  // Forward goes toward the meeting point, backward toward the token's origin.
  const CircuitSide& forward = r == Role::Right ? c.left : c.right;
  const CircuitSide& backward = r == Role::Right ? c.right : c.left;
  send_error(s, cfg, out, forward, c.e2e_id, level, token);
  send_error(s, cfg, out, backward, c.e2e_id, level, token);

  reset_sides(c);
  c.awaiting_error_ack = true;
  if (c.index == 1 && r != Role::Right) create_token(c, Direction::FromLeft, out);
  if (c.index == c.switches && r != Role::Left) create_token(c, Direction::FromRight, out);
}

void swap_succeeded(NodeState& s, const NodeConfig& cfg, Circuit& c, Outputs& out) {
  const Role r = role_of(c);
  c.left.phase = PtpPhase::Consumed;
  c.right.phase = PtpPhase::Consumed;
  if (r == Role::Center) {
    const auto level = static_cast<std::uint8_t>(std::max(c.left_token->level, c.right_token->level) + 1);
    token_event(out, TokenChange::Consumed, *c.left_token);
    token_event(out, TokenChange::Consumed, *c.right_token);
    c.left_token.reset();
    c.right_token.reset();
    c.swap_pending = false;
    c.complete = true;
    for (const CircuitSide* side : {&c.left, &c.right})
      send(s, cfg, out, *side->port, side->peer,
           {MessageType::SwappingComplete, c.e2e_id, level, token_id_for(c.e2e_id, Direction::FromLeft)});
    return;
  }
  Token& t = r == Role::Left ? *c.left_token : *c.right_token;
  t.level = static_cast<std::uint8_t>(t.level + 1);
  token_event(out, TokenChange::Transferred, t);
  const CircuitSide& to = r == Role::Left ? c.right : c.left;
  send(s, cfg, out, *to.port, to.peer, {MessageType::TokenTransfer, c.e2e_id, t.level, t.token_id});
}

/// Receipt of a SwappingError: clear what the failure destroyed now, defer
/// relaying and re-initiation until our ErrorAck is delivered.
void on_error(NodeState& s, const NodeConfig& cfg, Circuit& c, const FrameIn& in, bool from_left,
              Outputs& out) {
  const QpFrame& f = in.frame;
  const Direction dir = token_direction(f.qp.token_id);
  PendingErrorAction act{c.e2e_id, std::nullopt, f.qp.level, f.qp.token_id, false};

  const bool backward = from_left ? dir == Direction::FromRight : dir == Direction::FromLeft;
  if (backward) {
    reset_sides(c);
    act.relay_port = from_left ? c.right.port : c.left.port;
    act.restart_right = true;
    if (cfg.is_switch && dir == Direction::FromLeft && c.index == 1) create_token(c, Direction::FromLeft, out);
    if (cfg.is_switch && dir == Direction::FromRight && c.index == c.switches)
      create_token(c, Direction::FromRight, out);
  } else if (!from_left) {
    // Forward notice from the right: only our right pair is gone.
    c.right.phase = PtpPhase::Idle;
    act.restart_right = true;
  } else {
    const bool idle = c.right.phase == PtpPhase::Consumed;
    c.left.phase = PtpPhase::Idle;
    if (idle) {
      reset_sides(c);
      act.restart_right = true;
      if (cfg.is_switch && c.index == c.switches) create_token(c, Direction::FromRight, out);
    }
  }
  c.complete = false;

  QpFrame ack = make_frame(s, cfg, f.eth.src_mac,
                           {MessageType::ErrorAck, c.e2e_id, f.qp.level, f.qp.token_id, 0, f.qp.seq});
  s.deferred_errors[ack.qp.seq] = act;
  out.emplace_back(FrameOut{in.port, ack});
}

void run_deferred(NodeState& s, const NodeConfig& cfg, const PendingErrorAction& act, Outputs& out) {
  Circuit* c = find_circuit(s, act.e2e_id);
  if (!c) return;
  // Relay first so the link keeps the notice ahead of our next request.
  if (act.relay_port) {
    const CircuitSide& to = c->left.port == act.relay_port ? c->left : c->right;
    send_error(s, cfg, out, to, c->e2e_id, act.level, act.token_id);
  }
  if (act.restart_right) start_ptp(s, cfg, *c, out);
}

void activate_token(NodeState& s, const NodeConfig& cfg, Circuit& c, Direction d, Outputs& out) {
  auto& pending = c.incoming[static_cast<std::size_t>(d)];
  if (!pending) return;
  const Token t = *pending;
  pending.reset();
  auto& slot = t.direction == Direction::FromLeft ? c.left_token : c.right_token;
  if (slot) {
    out.emplace_back(Fault{FaultKind::TokenConflict, "token " + std::to_string(t.token_id) + " already held"});
    return;
  }
  if (t.level > c.levels()) {
    out.emplace_back(Fault{FaultKind::LevelOverflow, "level " + std::to_string(t.level) + " exceeds " +
                                                         std::to_string(c.levels())});
    return;
  }
  slot = t;
  token_event(out, TokenChange::Received, t);
  try_swap(s, cfg, c, out);
}

bool on_swap_frame(NodeState& s, const NodeConfig& cfg, const FrameIn& in, Outputs& out) {
  const QpFrame& f = in.frame;
  switch (f.qp.msg_type) {
    case MessageType::SwappingRequest:
    case MessageType::SwappingReply:
    case MessageType::SwappingError:
    case MessageType::ErrorAck:
    case MessageType::TokenTransfer:
    case MessageType::TokenAck:
    case MessageType::SwappingComplete:
    case MessageType::CompleteAck: break;
    default: return false;
  }
  Circuit* c = find_circuit(s, f.qp.e2e_id);
  if (!c) return true;
  bool from_left = false;
  if (!side_at(*c, in.port, &from_left)) return true;

  switch (f.qp.msg_type) {
    case MessageType::SwappingRequest: reply(s, cfg, out, in.port, f, MessageType::SwappingReply); break;

    case MessageType::SwappingReply:
      if (c->swap_pending) out.emplace_back(SwapAttempt{c->e2e_id, f.qp.level});
      break;

    case MessageType::SwappingError: on_error(s, cfg, *c, in, from_left, out); break;

    case MessageType::ErrorAck:
      if (c->awaiting_error_ack && !from_left) {
        c->awaiting_error_ack = false;
        start_ptp(s, cfg, *c, out);
      }
      break;

    case MessageType::TokenTransfer:
      c->incoming[static_cast<std::size_t>(token_direction(f.qp.token_id))] =
          Token{f.qp.token_id, token_direction(f.qp.token_id), f.qp.level};
      reply(s, cfg, out, in.port, f, MessageType::TokenAck);
      break;

    case MessageType::TokenAck:
      // The token has left this switch.
      (role_of(*c) == Role::Right ? c->right_token : c->left_token).reset();
      c->swap_pending = false;
      break;

    case MessageType::SwappingComplete: reply(s, cfg, out, in.port, f, MessageType::CompleteAck); break;

    default: break;
  }
  return true;
}

bool on_swap_delivered(NodeState& s, const NodeConfig& cfg, const FrameDelivered& d, Outputs& out) {
  const QpFrame& f = d.frame;
  switch (f.qp.msg_type) {
    case MessageType::ErrorAck: {
      auto it = s.deferred_errors.find(f.qp.seq);
      if (it != s.deferred_errors.end()) {
        const PendingErrorAction act = it->second;
        s.deferred_errors.erase(it);
        run_deferred(s, cfg, act, out);
      }
      return true;
    }
    case MessageType::TokenAck:
      if (Circuit* c = find_circuit(s, f.qp.e2e_id))
        activate_token(s, cfg, *c, token_direction(f.qp.token_id), out);
      return true;
    case MessageType::CompleteAck: {
      Circuit* c = find_circuit(s, f.qp.e2e_id);
      if (!c) return true;
      c->complete = true;
      if (!cfg.is_switch) {
        s.session.phase = SessionPhase::Ready;
        out.emplace_back(NotifyUser{NotifyKind::EntanglementReady, c->e2e_id});
        return true;
      }
      bool from_left = false;
      if (!side_at(*c, d.port, &from_left)) return true;
      const CircuitSide& to = from_left ? c->right : c->left;
      send(s, cfg, out, *to.port, to.peer,
           {MessageType::SwappingComplete, c->e2e_id, f.qp.level, f.qp.token_id});
      return true;
    }
    default: return false;
  }
}

}  // namespace

bool swap_step(NodeState& s, const NodeConfig& cfg, double, const Input& in, Outputs& out) {
  if (auto* f = std::get_if<FrameIn>(&in)) return on_swap_frame(s, cfg, *f, out);
  if (auto* d = std::get_if<FrameDelivered>(&in)) return on_swap_delivered(s, cfg, *d, out);
  if (auto* r = std::get_if<SwapAttemptResult>(&in)) {
    Circuit* c = find_circuit(s, r->e2e_id);
    if (!c || !c->swap_pending) return true;
    if (r->success) {
      swap_succeeded(s, cfg, *c, out);
    } else {
      swap_failed(s, cfg, *c, out);
    }
    return true;
  }
  return false;
}

// ---------------------------------------------------------------------------

Outputs Node::step(double now, const Input& in) {
  Outputs out;
  if (auto* f = std::get_if<FrameIn>(&in)) {
    if (f->port >= cfg_.ports.size() || !cfg_.ports[f->port].forwarding) return out;
    const QpFrame& fr = f->frame;
    const bool transit = fr.qp.msg_type == MessageType::DiscoveryRequest ||
                         fr.qp.msg_type == MessageType::DiscoveryReply ||
                         fr.qp.msg_type == MessageType::EstablishmentRequest;
    if (!transit && fr.eth.dst_mac != cfg_.mac) return out;
    state_.mac_table[fr.eth.src_mac] =
        MacEntry{f->port, cfg_.ports[f->port].quantum ? PortKind::Qeth : PortKind::Eth};
    if (fr.qp.ack_flag) state_.pending_acks.erase(fr.qp.ack_seq);
  }
  if (discovery_step(state_, cfg_, now, in, out)) return out;
  if (establish_step(state_, cfg_, now, in, out)) return out;
  if (ptp_step(state_, cfg_, now, in, out)) return out;
  swap_step(state_, cfg_, now, in, out);
  return out;
}

}  // namespace qeth::proto
