#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qeth/sim.hpp"
#include "qeth/topology.hpp"

namespace qeth {

/// Parse or semantic error. line/column are 1-based; 0 means "whole file".
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::size_t line, std::size_t column, const std::string& msg);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_, column_;
};

/// Link parameters as written; pq may be "auto" (fiber loss from length).
struct LinkTemplate {
  LinkParams params;
  bool pq_auto = false;
};

struct NodeDecl {
  NodeKind kind;
  std::string name;
  MacAddress mac;
  std::size_t line;
};

struct LinkDecl {
  std::string a, b;
  bool classical = true;
  bool quantum = false;
  LinkTemplate link;
  std::size_t line;
};

struct Defaults {
  double bits = 320;
  std::uint32_t qubits = 1;
  double p_swap = 1.0;
  double t_coherence = std::numeric_limits<double>::infinity();
  double refractive_index = 1.0;
  double alpha_db_per_km = 0.2;
  double t_keepalive = 0.1;
  unsigned k_miss = 3;
  unsigned max_q_retries = 100000;
  std::size_t max_steps = 10'000'000;
};

enum class ExperimentMode { Analyze, Simulate, Compare, Sweep };

struct Experiment {
  ExperimentMode mode = ExperimentMode::Simulate;
  std::string source = "alice";
  std::string target = "bob";
  std::size_t n_reps = 1;
  std::uint64_t seed = 1;
  // Sweep axes; an empty axis is not swept.
  std::vector<double> distance_km, link_km, collision_prob;
  std::vector<std::uint32_t> qubits;
  std::vector<std::string> sweep_modes{"analytic", "proposed"};
};

struct Scenario {
  std::string id = "scenario";
  std::vector<NodeDecl> nodes;
  std::vector<LinkDecl> links;
  LinkTemplate chain_link;  // [chain] section, used when D and l are given
  bool has_chain_link = false;
  Defaults defaults;
  Experiment experiment;
};

/// Strict line-oriented parser: `[section]` headers, `key=value` pairs,
/// node and link declarations in [topology]. `#` starts a comment.
Scenario parse_scenario(std::string_view text, std::string id = "scenario");
Scenario load_scenario(const std::string& path);

/// One point of the sweep grid (axes that are not swept stay empty).
struct GridPoint {
  std::optional<double> distance_km, link_km, collision_prob;
  std::optional<std::uint32_t> qubits;
  std::string label;  // e.g. "D=400;l=50;N_q=1"
};

/// Cartesian product of the axes in a fixed order (D, l, N_q, P_col), each
/// axis ascending. One empty point when nothing is swept.
std::vector<GridPoint> grid_points(const Scenario& s);

/// Topology as declared (no chain generation). Throws ScenarioError with the
/// offending line on dangling references or constraint violations.
NetworkTopology build_topology(const Scenario& s);

/// Full simulation input for a grid point: generates the S = ceil(D/l) chain
/// when D and l are set, applies N_q / P_col overrides, resolves pq=auto.
sim::RunSpec build_run(const Scenario& s, const GridPoint& g);

/// Number of switches a grid point uses (chain size or declared path).
std::size_t grid_switches(const Scenario& s, const GridPoint& g);

}  // namespace qeth
