// Independent reference computations shared by the unit tests and the
// acceptance binary.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "qeth/topology.hpp"

namespace oracle {

/// Random switch-only graph: n nodes, each pair linked with probability p_edge,
/// a quarter of the links classical-only. Integer costs so ties happen.
inline qeth::NetworkTopology random_graph(std::mt19937_64& rng, std::size_t n, double p_edge) {
  qeth::NetworkTopology t;
  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < n; ++i)
    t.add_node(qeth::NodeKind::Switch, "n" + std::to_string(i),
               qeth::MacAddress{2, 0, 0, 0, 0, static_cast<std::uint8_t>(order[i] + 1)});
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> cost(1, 4);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      if (u(rng) >= p_edge) continue;
      qeth::LinkParams p;
      p.classical_cost = cost(rng);
      p.quantum_cost = cost(rng);
      t.add_link(a, b, true, u(rng) >= 0.25, p);
    }
  return t;
}

/// Minimum spanning-tree cost over paired links by trying every combination
/// of |V|-1 paired links. nullopt when the quantum-capable nodes are not
/// connected.
inline std::optional<double> brute_force_mst(const qeth::NetworkTopology& t) {
  const auto paired = t.paired_links();
  const auto nodes = t.quantum_capable_nodes();
  if (nodes.empty()) return std::nullopt;
  const std::size_t need = nodes.size() - 1;
  std::optional<double> best;
  std::vector<std::size_t> pick;

  auto evaluate = [&] {
    std::vector<std::size_t> comp(t.nodes().size());
    for (std::size_t i = 0; i < comp.size(); ++i) comp[i] = i;
    auto find = [&](std::size_t x) {
      while (comp[x] != x) x = comp[x];
      return x;
    };
    double cost = 0;
    for (std::size_t k : pick) {
      const auto& l = t.link(paired[k]);
      const auto ra = find(l.a), rb = find(l.b);
      if (ra == rb) return;  // cycle
      comp[ra] = rb;
      cost += qeth::link_cost(l.params);
    }
    // |V|-1 acyclic links over |V| nodes span them.
    if (!best || cost < *best) best = cost;
  };
  auto rec = [&](auto&& self, std::size_t from) -> void {
    if (pick.size() == need) {
      evaluate();
      return;
    }
    for (std::size_t k = from; k + (need - pick.size()) <= paired.size(); ++k) {
      pick.push_back(k);
      self(self, k + 1);
      pick.pop_back();
    }
  };
  rec(rec, 0);
  return best;
}

}  // namespace oracle
