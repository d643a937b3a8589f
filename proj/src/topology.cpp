#include "qeth/topology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <tuple>

namespace qeth {

std::string format_mac(const MacAddress& mac) {
  char buf[18];
  std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", mac[0], mac[1], mac[2],
                mac[3], mac[4], mac[5]);
  return buf;
}

std::optional<MacAddress> parse_mac(std::string_view text) {
  MacAddress mac{};
  if (text.size() != 17) return std::nullopt;
  auto hex = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  for (std::size_t i = 0; i < 6; ++i) {
    const std::size_t at = i * 3;
    if (i > 0 && text[at - 1] != ':' && text[at - 1] != '-') return std::nullopt;
    const int hi = hex(text[at]);
    const int lo = hex(text[at + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    mac[i] = static_cast<std::uint8_t>(hi * 16 + lo);
  }
  return mac;
}

std::vector<std::string> check_link_params(const LinkParams& p) {
  std::vector<std::string> out;
  auto prob = [&](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) out.push_back(std::string(name) + " must lie in [0,1]");
  };
  prob(p.bit_error_prob, "pb");
  prob(p.qubit_loss_prob, "pq");
  prob(p.collision_prob, "pcol");
  if (!(p.classical_rate_bps > 0.0)) out.emplace_back("rb must be positive");
  if (!(p.quantum_rate_qbps > 0.0)) out.emplace_back("rq must be positive");
  if (!(p.length_km >= 0.0)) out.emplace_back("d must be non-negative");
  if (!(p.processing_s >= 0.0)) out.emplace_back("tproc must be non-negative");
  if (!(p.backoff_s >= 0.0)) out.emplace_back("tbo must be non-negative");
  if (!(p.classical_cost >= 0.0) || !(p.quantum_cost >= 0.0))
    out.emplace_back("costs must be non-negative");
  return out;
}

std::size_t NetworkTopology::add_node(NodeKind kind, std::string name, MacAddress mac) {
  NodeId id;
  id.kind = kind;
  id.index = static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [&](const NodeId& n) { return n.kind == kind; }));
  id.mac = mac;
  id.name = std::move(name);
  nodes_.push_back(std::move(id));
  return nodes_.size() - 1;
}

std::size_t NetworkTopology::add_link(std::size_t a, std::size_t b, bool classical, bool quantum,
                                      const LinkParams& params) {
  if (a >= nodes_.size() || b >= nodes_.size()) throw std::out_of_range("link endpoint");
  links_.push_back(Link{a, b, classical, quantum, params});
  return links_.size() - 1;
}

void NetworkTopology::remove_link(std::size_t link_index) {
  links_.erase(links_.begin() + static_cast<std::ptrdiff_t>(link_index));
}

std::optional<std::size_t> NetworkTopology::find_node(std::string_view name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].name == name) return i;
  return std::nullopt;
}

std::optional<std::size_t> NetworkTopology::find_node(const MacAddress& mac) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].mac == mac) return i;
  return std::nullopt;
}

std::size_t NetworkTopology::user_count() const {
  return static_cast<std::size_t>(std::count_if(
      nodes_.begin(), nodes_.end(), [](const NodeId& n) { return n.kind == NodeKind::User; }));
}

std::size_t NetworkTopology::switch_count() const { return nodes_.size() - user_count(); }

std::vector<std::size_t> NetworkTopology::paired_links() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < links_.size(); ++i)
    if (links_[i].paired()) out.push_back(i);
  return out;
}

std::size_t NetworkTopology::quantum_link_count() const {
  return static_cast<std::size_t>(
      std::count_if(links_.begin(), links_.end(), [](const Link& l) { return l.quantum; }));
}

std::vector<std::size_t> NetworkTopology::ports(std::size_t node) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < links_.size(); ++i)
    if (links_[i].a == node || links_[i].b == node) out.push_back(i);
  return out;
}

std::optional<std::size_t> NetworkTopology::port_of(std::size_t node, std::size_t link_index) const {
  const auto p = ports(node);
  const auto it = std::find(p.begin(), p.end(), link_index);
  if (it == p.end()) return std::nullopt;
  return static_cast<std::size_t>(it - p.begin());
}

std::vector<std::size_t> NetworkTopology::quantum_capable_nodes() const {
  std::set<std::size_t> s;
  for (const auto& l : links_) {
    if (l.paired()) {
      s.insert(l.a);
      s.insert(l.b);
    }
  }
  return {s.begin(), s.end()};
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::UserUserLink: return "user-user link";
    case ViolationKind::UnpairedQuantumLink: return "unpaired quantum link";
    case ViolationKind::DuplicateMac: return "duplicate MAC";
    case ViolationKind::DuplicateLink: return "duplicate link";
    case ViolationKind::SelfLoop: return "self loop";
    case ViolationKind::InvalidLinkParams: return "invalid link parameters";
  }
  return "?";
}

std::vector<Violation> validate_topology(const NetworkTopology& t) {
  std::vector<Violation> out;
  const auto& nodes = t.nodes();
  auto pair_name = [&](std::size_t a, std::size_t b) { return nodes[a].name + "-" + nodes[b].name; };

  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t j = i + 1; j < nodes.size(); ++j)
      if (nodes[i].mac == nodes[j].mac)
        out.push_back({ViolationKind::DuplicateMac, i, j,
                       "duplicate MAC " + format_mac(nodes[i].mac) + " on " + pair_name(i, j)});

  std::set<std::pair<std::size_t, std::size_t>> classical_pairs;
  std::set<std::pair<std::size_t, std::size_t>> quantum_pairs;
  for (const auto& l : t.links()) {
    const auto key = std::minmax(l.a, l.b);
    if (l.classical && !classical_pairs.insert(key).second)
      out.push_back({ViolationKind::DuplicateLink, l.a, l.b, "duplicate classical link " + pair_name(l.a, l.b)});
    if (l.quantum && !quantum_pairs.insert(key).second)
      out.push_back({ViolationKind::DuplicateLink, l.a, l.b, "duplicate quantum link " + pair_name(l.a, l.b)});
  }

  for (const auto& l : t.links()) {
    if (l.a == l.b) {
      out.push_back({ViolationKind::SelfLoop, l.a, l.b, "self loop on " + nodes[l.a].name});
      continue;
    }
    if (nodes[l.a].kind == NodeKind::User && nodes[l.b].kind == NodeKind::User)
      out.push_back({ViolationKind::UserUserLink, l.a, l.b, "user-user link " + pair_name(l.a, l.b)});
    if (l.quantum && !classical_pairs.count(std::minmax(l.a, l.b)))
      out.push_back({ViolationKind::UnpairedQuantumLink, l.a, l.b,
                     "unpaired quantum link " + pair_name(l.a, l.b)});
    for (const auto& msg : check_link_params(l.params))
      out.push_back({ViolationKind::InvalidLinkParams, l.a, l.b, pair_name(l.a, l.b) + ": " + msg});
  }
  return out;
}

LinkParams with_default_costs(LinkParams p, double k_classical, double k_quantum) {
  p.classical_cost = k_classical / p.classical_rate_bps;
  const double effective = p.quantum_rate_qbps * (1.0 - p.qubit_loss_prob);
  p.quantum_cost = effective > 0.0 ? k_quantum / effective : HUGE_VAL;
  return p;
}

double ActiveTree::total_cost(const NetworkTopology& t) const {
  double sum = 0.0;
  for (auto i : active_links) sum += link_cost(t.link(i).params);
  return sum;
}

bool ActiveTree::is_forwarding(std::size_t node, std::size_t port) const {
  const auto it = port_states.find({node, port});
  return it != port_states.end() && it->second == PortState::Forwarding;
}

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

}  // namespace

ActiveTree run_qstp(const NetworkTopology& t) {
  const auto capable = t.quantum_capable_nodes();
  if (capable.empty()) throw DisconnectedQuantumGraph("no paired links");

  ActiveTree tree;
  tree.root = *std::min_element(capable.begin(), capable.end(), [&](std::size_t a, std::size_t b) {
    return t.node(a).mac < t.node(b).mac;
  });

  auto paired = t.paired_links();
  auto key = [&](std::size_t i) {
    const auto& l = t.link(i);
    const auto [lo, hi] = std::minmax(t.node(l.a).mac, t.node(l.b).mac);
    return std::make_tuple(link_cost(l.params), lo, hi, i);
  };
  std::sort(paired.begin(), paired.end(), [&](std::size_t x, std::size_t y) { return key(x) < key(y); });

  DisjointSets sets(t.nodes().size());
  for (auto i : paired)
    if (sets.unite(t.link(i).a, t.link(i).b)) tree.active_links.push_back(i);

  const auto root_set = sets.find(tree.root);
  for (auto n : capable)
    if (sets.find(n) != root_set)
      throw DisconnectedQuantumGraph("node " + t.node(n).name + " unreachable over paired links");

  std::sort(tree.active_links.begin(), tree.active_links.end());
  for (auto i : t.paired_links()) {
    const bool active = std::binary_search(tree.active_links.begin(), tree.active_links.end(), i);
    const auto state = active ? PortState::Forwarding : PortState::Blocked;
    const auto& l = t.link(i);
    tree.port_states[{l.a, *t.port_of(l.a, i)}] = state;
    tree.port_states[{l.b, *t.port_of(l.b, i)}] = state;
  }
  return tree;
}

NetworkTopology make_chain(std::size_t switches, const LinkParams& link) {
  NetworkTopology t;
  auto mac = [](std::size_t n) {
    return MacAddress{0x02, 0x00, 0x00, 0x00, static_cast<std::uint8_t>(n >> 8),
                      static_cast<std::uint8_t>(n & 0xff)};
  };
  std::size_t prev = t.add_node(NodeKind::User, "alice", mac(1));
  for (std::size_t s = 1; s <= switches; ++s) {
    const auto n = t.add_node(NodeKind::Switch, "sw" + std::to_string(s), mac(0x100 + s));
    t.add_link(prev, n, true, true, link);
    prev = n;
  }
  const auto bob = t.add_node(NodeKind::User, "bob", mac(2));
  t.add_link(prev, bob, true, true, link);
  return t;
}

}  // namespace qeth
