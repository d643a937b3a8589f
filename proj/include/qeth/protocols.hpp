#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qeth/codec.hpp"
#include "qeth/topology.hpp"

namespace qeth::proto {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ProtocolConfig {
  std::uint32_t qubits = 1;          // N_q announced in PtpEntanglementRequest
  double keepalive_period_s = 0.1;
  unsigned keepalive_miss_limit = 3;
  double discovery_timeout_s = 1.0;
  double establishment_timeout_s = 1.0;
  bool keepalive = true;
};

struct PortConfig {
  bool quantum = true;
  bool forwarding = true;  // Q-STP port state; blocked ports drop traffic
};

struct NodeConfig {
  std::string name;
  MacAddress mac{};
  bool is_switch = true;
  std::vector<PortConfig> ports;
  ProtocolConfig protocol;
};

// ---------------------------------------------------------------------------
// Events
// ---------------------------------------------------------------------------

enum class TimerKind { DiscoveryTimeout, EstablishmentTimeout, KeepAliveTick };

struct FrameIn {
  std::size_t port;
  QpFrame frame;
};
struct QubitPacketIn {
  std::size_t port;
  std::uint64_t e2e_id;
  std::uint32_t received;
};
struct SwapAttemptResult {
  std::uint64_t e2e_id;
  bool success;
};
struct TimerExpired {
  TimerKind kind;
  std::uint64_t e2e_id = 0;
  std::uint64_t generation = 0;
};
/// The link layer confirms that a frame this node sent has been received.
struct FrameDelivered {
  std::size_t port;
  QpFrame frame;
};
/// The quantum link gave up after the configured retry limit.
struct QubitDeliveryFailed {
  std::size_t port;
  std::uint64_t e2e_id;
};
struct StartDiscovery {
  MacAddress target;
};
struct StartEstablishment {
  MacAddress target;
  std::uint64_t e2e_id;
};

using Input = std::variant<FrameIn, QubitPacketIn, SwapAttemptResult, TimerExpired, FrameDelivered,
                           QubitDeliveryFailed, StartDiscovery, StartEstablishment>;

enum class NotifyKind {
  DiscoveryComplete,
  DiscoveryFailed,
  EstablishmentComplete,
  EstablishmentTimeout,
  EstablishmentInterrupted,
  EntanglementReady,
};

enum class FaultKind { TokenConflict, LevelOverflow };

enum class Direction : std::uint8_t { FromLeft = 0, FromRight = 1 };

enum class TokenChange { Created, Transferred, Received, Destroyed, Consumed };

struct FrameOut {
  std::size_t port;
  QpFrame frame;
};
struct QubitPacketOut {
  std::size_t port;
  std::uint64_t e2e_id;
  std::uint32_t qubits;
};
struct NotifyUser {
  NotifyKind kind;
  std::uint64_t e2e_id = 0;
};
struct StartTimer {
  TimerKind kind;
  double delay_s;
  std::uint64_t e2e_id = 0;
  std::uint64_t generation = 0;
};
/// Ask the environment for a Bernoulli(P_swap) swap outcome.
struct SwapAttempt {
  std::uint64_t e2e_id;
  std::uint8_t level;
};
struct TokenEvent {
  TokenChange change;
  Direction direction;
  std::uint8_t level;
  std::uint16_t token_id;
};
struct Fault {
  FaultKind kind;
  std::string detail;
};

using Output = std::variant<FrameOut, QubitPacketOut, NotifyUser, StartTimer, SwapAttempt, TokenEvent, Fault>;
using Outputs = std::vector<Output>;

std::string_view to_string(NotifyKind k);
std::string_view to_string(FaultKind k);
std::string_view to_string(TokenChange c);

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

enum class PortKind { Eth, Qeth };

struct MacEntry {
  std::size_t port;
  PortKind kind;
};

struct Token {
  std::uint16_t token_id = 0;
  Direction direction = Direction::FromLeft;
  std::uint8_t level = 0;
};

std::uint16_t token_id_for(std::uint64_t e2e_id, Direction d);
Direction token_direction(std::uint16_t token_id);

/// Point-to-point entanglement progress on one adjacent link of a circuit.
enum class PtpPhase {
  Idle,           // no live pair, nothing in flight
  RequestSent,    // initiator waiting for PtpEntanglementReply
  ReplySent,      // responder waiting for delivery of its reply (when it is the source)
  AwaitQubits,    // waiting for the quantum packet
  QubitsSent,     // source waiting for the qubit-receipt ack
  AckSent,        // receiver waiting for delivery of its qubit-receipt ack
  Ready,          // live entangled pair held on this side
  Consumed,       // pair used by a local swap
};

std::string_view to_string(PtpPhase p);

struct CircuitSide {
  std::optional<std::size_t> port;  // empty for the outer side of an edge user
  MacAddress peer{};
  bool initiator = false;  // sends PtpEntanglementRequest on this link
  bool source = false;     // sends the quantum packet on this link
  PtpPhase phase = PtpPhase::Idle;
  std::uint32_t handshake_seq = 0;
  double last_keepalive_s = 0.0;
  bool monitor = false;  // neighbour is a switch and sends KeepAlive
};

/// Entanglement table entry (switches) or circuit record (users).
struct Circuit {
  std::uint64_t e2e_id = 0;
  std::size_t index = 0;     // 0 = initiating user, 1..S switches, S+1 responding user
  std::size_t switches = 0;  // S, known once the EstablishmentReply passes
  bool established = false;
  CircuitSide left;
  CircuitSide right;
  std::optional<Token> left_token;
  std::optional<Token> right_token;
  std::array<std::optional<Token>, 2> incoming;  // by Direction; live once TokenAck is delivered
  bool swap_pending = false;  // SwappingRequest/attempt/TokenTransfer in flight
  bool awaiting_error_ack = false;
  std::uint64_t keepalive_generation = 0;
  bool complete = false;

  std::size_t levels() const { return switches / 2 + 1; }
  std::size_t center() const { return switches / 2 + 1; }
};

enum class SessionPhase { Idle, Discovering, Discovered, Establishing, Established, Ready, Failed };

struct UserSession {
  SessionPhase phase = SessionPhase::Idle;
  MacAddress target{};
  std::uint64_t e2e_id = 0;
  std::uint64_t generation = 0;
};

/// Work deferred until this node's ErrorAck has been delivered.
struct PendingErrorAction {
  std::uint64_t e2e_id = 0;
  std::optional<std::size_t> relay_port;
  std::uint8_t level = 0;
  std::uint16_t token_id = 0;
  bool restart_right = false;
};

struct NodeState {
  std::map<MacAddress, MacEntry> mac_table;
  std::map<std::uint64_t, Circuit> entanglement_table;
  std::map<std::uint32_t, MessageType> pending_acks;
  std::map<std::uint32_t, PendingErrorAction> deferred_errors;  // keyed by ErrorAck seq
  std::uint32_t next_seq = 1;
  UserSession session;  // users only
};

// ---------------------------------------------------------------------------
// State machines
// ---------------------------------------------------------------------------

/// Per-protocol handlers. Each returns true when it consumed the input.
/// Outputs are a pure function of (state, config, now, input).
bool discovery_step(NodeState& s, const NodeConfig& cfg, double now, const Input& in, Outputs& out);
bool establish_step(NodeState& s, const NodeConfig& cfg, double now, const Input& in, Outputs& out);
bool ptp_step(NodeState& s, const NodeConfig& cfg, double now, const Input& in, Outputs& out);
bool swap_step(NodeState& s, const NodeConfig& cfg, double now, const Input& in, Outputs& out);

/// One node: applies inputs sequentially through the four protocol handlers.
class Node {
 public:
  explicit Node(NodeConfig cfg) : cfg_(std::move(cfg)) {}

  Outputs step(double now, const Input& in);

  const NodeConfig& config() const { return cfg_; }
  const NodeState& state() const { return state_; }
  NodeState& mutable_state() { return state_; }

 private:
  NodeConfig cfg_;
  NodeState state_;
};

}  // namespace qeth::proto
