#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qeth {

using MacAddress = std::array<std::uint8_t, 6>;

std::string format_mac(const MacAddress& mac);
std::optional<MacAddress> parse_mac(std::string_view text);

enum class NodeKind { User, Switch };

struct NodeId {
  NodeKind kind = NodeKind::Switch;
  std::size_t index = 0;  // position within its kind (user #i / switch #i)
  MacAddress mac{};
  std::string name;
};

/// Physical constants of one link. Units: km, bit/s, qubit/s, seconds.
struct LinkParams {
  double length_km = 0.0;
  double classical_rate_bps = 1e9;
  double quantum_rate_qbps = 1e6;
  double bit_error_prob = 0.0;
  double qubit_loss_prob = 0.0;
  double processing_s = 0.0;
  double backoff_s = 0.0;
  double collision_prob = 0.0;
  double classical_cost = 1.0;
  double quantum_cost = 0.0;
};

/// Returns a description of every violated LinkParams invariant (empty if valid).
std::vector<std::string> check_link_params(const LinkParams& p);

struct Link {
  std::size_t a = 0;
  std::size_t b = 0;
  bool classical = true;
  bool quantum = false;
  LinkParams params;

  bool paired() const { return classical && quantum; }
  std::size_t other(std::size_t n) const { return n == a ? b : a; }
};

/// Dual classical/quantum graph over users and switches. Links are undirected.
class NetworkTopology {
 public:
  std::size_t add_node(NodeKind kind, std::string name, MacAddress mac);
  std::size_t add_link(std::size_t a, std::size_t b, bool classical, bool quantum,
                       const LinkParams& params);
  void remove_link(std::size_t link_index);

  const std::vector<NodeId>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  const NodeId& node(std::size_t i) const { return nodes_.at(i); }
  const Link& link(std::size_t i) const { return links_.at(i); }

  std::optional<std::size_t> find_node(std::string_view name) const;
  std::optional<std::size_t> find_node(const MacAddress& mac) const;

  std::size_t user_count() const;
  std::size_t switch_count() const;

  /// Indices of links that are both classical and quantum (L_c ∩ L_q).
  std::vector<std::size_t> paired_links() const;
  std::size_t quantum_link_count() const;

  /// Link indices incident to `node`, ordered by link index. A port id is the
  /// position in this list.
  std::vector<std::size_t> ports(std::size_t node) const;
  std::optional<std::size_t> port_of(std::size_t node, std::size_t link_index) const;

  /// Nodes incident to at least one paired link.
  std::vector<std::size_t> quantum_capable_nodes() const;

 private:
  std::vector<NodeId> nodes_;
  std::vector<Link> links_;
};

enum class ViolationKind {
  UserUserLink,
  UnpairedQuantumLink,
  DuplicateMac,
  DuplicateLink,
  SelfLoop,
  InvalidLinkParams,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::size_t a = 0;
  std::size_t b = 0;
  std::string message;
};

/// Empty result means the topology is valid.
std::vector<Violation> validate_topology(const NetworkTopology& t);

/// Joint Q-STP edge weight: classical plus quantum cost.
inline double link_cost(const LinkParams& p) { return p.classical_cost + p.quantum_cost; }

/// Default cost derivation: C_c = k_classical / R_b, C_q = k_quantum / (R_q (1 - P_q)).
LinkParams with_default_costs(LinkParams p, double k_classical, double k_quantum);

enum class PortState { Forwarding, Blocked };

struct ActiveTree {
  std::size_t root = 0;
  std::vector<std::size_t> active_links;  // link indices, ascending
  std::map<std::pair<std::size_t, std::size_t>, PortState> port_states;  // (node, port)

  double total_cost(const NetworkTopology& t) const;
  bool is_forwarding(std::size_t node, std::size_t port) const;
};

class DisconnectedQuantumGraph : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Minimum-cost spanning tree over paired links, rooted at the lowest MAC.
/// Ties are broken by (cost, lower endpoint MAC, higher endpoint MAC).
ActiveTree run_qstp(const NetworkTopology& t);

/// Linear chain user - S switches - user with identical links. S = 0 yields a
/// direct user-user link, which validate_topology rejects; only analysis and
/// simulation use that form.
NetworkTopology make_chain(std::size_t switches, const LinkParams& link);

}  // namespace qeth
