#include "qeth/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "qeth/delay.hpp"

namespace qeth {

ScenarioError::ScenarioError(std::size_t line, std::size_t column, const std::string& msg)
    : std::runtime_error(line ? "line " + std::to_string(line) + ":" + std::to_string(column) + ": " + msg
                              : msg),
      line_(line),
      column_(column) {}

namespace {

struct Token {
  std::string text;
  std::size_t column;  // 1-based
};

std::vector<Token> split_words(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size()) break;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    out.push_back({std::string(line.substr(start, i - start)), start + 1});
  }
  return out;
}

double parse_number(const std::string& text, std::size_t line, std::size_t col) {
  if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
  double v = 0;
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end || !std::isfinite(v))
    throw ScenarioError(line, col, "expected a number, got '" + text + "'");
  return v;
}

double parse_prob(const std::string& text, std::size_t line, std::size_t col) {
  const double v = parse_number(text, line, col);
  if (v < 0.0 || v > 1.0) throw ScenarioError(line, col, "probability " + text + " outside [0,1]");
  return v;
}

std::uint64_t parse_uint(const std::string& text, std::size_t line, std::size_t col) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end) throw ScenarioError(line, col, "expected an integer, got '" + text + "'");
  return v;
}

/// "a,b,c" or "start:stop:step" (inclusive).
std::vector<double> parse_axis(const std::string& text, std::size_t line, std::size_t col) {
  std::vector<double> out;
  if (text.empty()) throw ScenarioError(line, col, "empty sweep axis");
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw ScenarioError(line, col, "range must be start:stop:step");
    const double a = parse_number(parts[0], line, col), b = parse_number(parts[1], line, col),
                 st = parse_number(parts[2], line, col);
    if (!(st > 0) || b < a) throw ScenarioError(line, col, "range needs step > 0 and stop >= start");
    for (std::size_t k = 0;; ++k) {
      const double v = a + static_cast<double>(k) * st;
      if (v > b + 1e-9 * st) break;
      out.push_back(v);
    }
  } else {
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) {
      if (p.empty()) throw ScenarioError(line, col, "empty value in list '" + text + "'");
      out.push_back(parse_number(p, line, col));
    }
  }
  if (out.empty()) throw ScenarioError(line, col, "empty sweep axis");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Applies one link key; returns false for unknown keys.
bool apply_link_key(LinkTemplate& t, const std::string& key, const std::string& val, std::size_t line,
                    std::size_t col) {
  LinkParams& p = t.params;
  if (key == "d") p.length_km = parse_number(val, line, col);
  else if (key == "rb") p.classical_rate_bps = parse_number(val, line, col);
  else if (key == "rq") p.quantum_rate_qbps = parse_number(val, line, col);
  else if (key == "pb") p.bit_error_prob = parse_prob(val, line, col);
  else if (key == "pq") {
    if (val == "auto") t.pq_auto = true;
    else {
      t.pq_auto = false;
      p.qubit_loss_prob = parse_prob(val, line, col);
    }
  } else if (key == "tproc") p.processing_s = parse_number(val, line, col);
  else if (key == "tbo") p.backoff_s = parse_number(val, line, col);
  else if (key == "pcol") p.collision_prob = parse_prob(val, line, col);
  else if (key == "cc") p.classical_cost = parse_number(val, line, col);
  else if (key == "cq") p.quantum_cost = parse_number(val, line, col);
  else return false;
  return true;
}

std::pair<std::string, std::string> split_kv(const Token& t, std::size_t line) {
  const auto eq = t.text.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ScenarioError(line, t.column, "expected key=value, got '" + t.text + "'");
  return {t.text.substr(0, eq), t.text.substr(eq + 1)};
}

void check_link(const LinkParams& p, std::size_t line) {
  const auto problems = check_link_params(p);
  if (!problems.empty()) throw ScenarioError(line, 1, problems.front());
}

LinkParams resolve_link(const LinkTemplate& t, double alpha) {
  LinkParams p = t.params;
  if (t.pq_auto) p.qubit_loss_prob = fiber_loss_probability(p.length_km, alpha);
  return p;
}

enum class Section { None, Topology, Chain, Defaults, Experiment };

void parse_topology_line(Scenario& s, const std::vector<Token>& w, std::size_t line) {
  const std::string& head = w[0].text;
  if (head == "user" || head == "switch") {
    if (w.size() != 3) throw ScenarioError(line, w[0].column, head + " needs <name> <mac>");
    auto mac = parse_mac(w[2].text);
    if (!mac) throw ScenarioError(line, w[2].column, "bad MAC address '" + w[2].text + "'");
    for (const auto& n : s.nodes)
      if (n.name == w[1].text)
        throw ScenarioError(line, w[1].column, "node '" + w[1].text + "' declared twice");
    s.nodes.push_back({head == "user" ? NodeKind::User : NodeKind::Switch, w[1].text, *mac, line});
    return;
  }
  if (head != "link") throw ScenarioError(line, w[0].column, "unknown declaration '" + head + "'");
  if (w.size() < 4) throw ScenarioError(line, w[0].column, "link needs <a> <b> classical [quantum] ...");
  LinkDecl d;
  d.a = w[1].text;
  d.b = w[2].text;
  d.line = line;
  d.classical = false;
  std::size_t i = 3;
  for (; i < w.size() && w[i].text.find('=') == std::string::npos; ++i) {
    if (w[i].text == "classical") d.classical = true;
    else if (w[i].text == "quantum") d.quantum = true;
    else throw ScenarioError(line, w[i].column, "unknown link flag '" + w[i].text + "'");
  }
  if (!d.classical) throw ScenarioError(line, w[0].column, "every link has a classical channel");
  for (; i < w.size(); ++i) {
    auto [k, v] = split_kv(w[i], line);
    if (!apply_link_key(d.link, k, v, line, w[i].column))
      throw ScenarioError(line, w[i].column, "unknown link key '" + k + "'");
  }
  s.links.push_back(d);
}

void parse_chain_line(Scenario& s, const Token& t, std::size_t line) {
  auto [k, v] = split_kv(t, line);
  if (k == "d") throw ScenarioError(line, t.column, "chain link length comes from the l axis");
  if (!apply_link_key(s.chain_link, k, v, line, t.column))
    throw ScenarioError(line, t.column, "unknown chain key '" + k + "'");
  s.has_chain_link = true;
}

void parse_defaults_line(Scenario& s, const Token& t, std::size_t line) {
  auto [k, v] = split_kv(t, line);
  Defaults& d = s.defaults;
  const std::size_t c = t.column;
  if (k == "N_b") {
    d.bits = parse_number(v, line, c);
    if (!(d.bits >= 1)) throw ScenarioError(line, c, "N_b must be >= 1");
  } else if (k == "N_q") {
    d.qubits = static_cast<std::uint32_t>(parse_uint(v, line, c));
    if (d.qubits == 0) throw ScenarioError(line, c, "N_q must be >= 1");
  } else if (k == "P_swap") {
    d.p_swap = parse_number(v, line, c);
    if (!(d.p_swap > 0 && d.p_swap <= 1)) throw ScenarioError(line, c, "P_swap must lie in (0,1]");
  } else if (k == "t_coherence") {
    d.t_coherence = parse_number(v, line, c);
    if (!(d.t_coherence > 0)) throw ScenarioError(line, c, "t_coherence must be > 0");
  } else if (k == "n") {
    d.refractive_index = parse_number(v, line, c);
    if (!(d.refractive_index > 0)) throw ScenarioError(line, c, "n must be > 0");
  } else if (k == "alpha") {
    d.alpha_db_per_km = parse_number(v, line, c);
    if (d.alpha_db_per_km < 0) throw ScenarioError(line, c, "alpha must be >= 0");
  } else if (k == "t_keepalive") {
    d.t_keepalive = parse_number(v, line, c);
    if (!(d.t_keepalive > 0)) throw ScenarioError(line, c, "t_keepalive must be > 0");
  } else if (k == "k_miss") {
    d.k_miss = static_cast<unsigned>(parse_uint(v, line, c));
    if (d.k_miss == 0) throw ScenarioError(line, c, "k_miss must be >= 1");
  } else if (k == "max_q_retries") {
    d.max_q_retries = static_cast<unsigned>(parse_uint(v, line, c));
    if (d.max_q_retries == 0) throw ScenarioError(line, c, "max_q_retries must be >= 1");
  } else if (k == "max_steps") {
    d.max_steps = parse_uint(v, line, c);
  } else {
    throw ScenarioError(line, c, "unknown defaults key '" + k + "'");
  }
}

void parse_experiment_line(Scenario& s, const Token& t, std::size_t line) {
  auto [k, v] = split_kv(t, line);
  Experiment& e = s.experiment;
  const std::size_t c = t.column;
  if (k == "mode") {
    static const std::map<std::string, ExperimentMode> modes = {{"analyze", ExperimentMode::Analyze},
                                                                {"simulate", ExperimentMode::Simulate},
                                                                {"compare", ExperimentMode::Compare},
                                                                {"sweep", ExperimentMode::Sweep}};
    auto it = modes.find(v);
    if (it == modes.end()) throw ScenarioError(line, c, "unknown mode '" + v + "'");
    e.mode = it->second;
  } else if (k == "id") {
    if (v.empty()) throw ScenarioError(line, c, "empty id");
    s.id = v;
  } else if (k == "source") {
    e.source = v;
  } else if (k == "target") {
    e.target = v;
  } else if (k == "n_reps") {
    e.n_reps = parse_uint(v, line, c);
    if (e.n_reps == 0) throw ScenarioError(line, c, "n_reps must be >= 1");
  } else if (k == "seed") {
    e.seed = parse_uint(v, line, c);
  } else if (k == "D") {
    e.distance_km = parse_axis(v, line, c);
  } else if (k == "l") {
    e.link_km = parse_axis(v, line, c);
  } else if (k == "P_col") {
    e.collision_prob = parse_axis(v, line, c);
    for (double p : e.collision_prob)
      if (p < 0 || p > 1) throw ScenarioError(line, c, "P_col outside [0,1]");
  } else if (k == "N_q") {
    e.qubits.clear();
    for (double q : parse_axis(v, line, c)) {
      if (q < 1 || q != std::floor(q)) throw ScenarioError(line, c, "N_q values must be positive integers");
      e.qubits.push_back(static_cast<std::uint32_t>(q));
    }
  } else if (k == "sweep_modes") {
    static const std::set<std::string> known = {"analytic", "proposed", "model", "packet", "baseline"};
    e.sweep_modes.clear();
    std::stringstream ss(v);
    for (std::string m; std::getline(ss, m, ',');) {
      if (!known.count(m)) throw ScenarioError(line, c, "unknown sweep mode '" + m + "'");
      e.sweep_modes.push_back(m);
    }
    if (e.sweep_modes.empty()) throw ScenarioError(line, c, "empty sweep_modes");
  } else {
    throw ScenarioError(line, c, "unknown experiment key '" + k + "'");
  }
}

}  // namespace

Scenario parse_scenario(std::string_view text, std::string id) {
  Scenario s;
  s.id = std::move(id);
  Section section = Section::None;
  std::set<Section> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    while (!raw.empty() && (raw.back() == '\r' || raw.back() == ' ' || raw.back() == '\t')) raw.remove_suffix(1);
    const auto words = split_words(raw);
    if (words.empty()) continue;

    if (words[0].text.front() == '[') {
      static const std::map<std::string, Section> names = {{"[topology]", Section::Topology},
                                                           {"[chain]", Section::Chain},
                                                           {"[defaults]", Section::Defaults},
                                                           {"[experiment]", Section::Experiment}};
      auto it = names.find(words[0].text);
      if (it == names.end() || words.size() != 1)
        throw ScenarioError(line_no, words[0].column, "unknown section '" + std::string(raw) + "'");
      if (!seen.insert(it->second).second)
        throw ScenarioError(line_no, words[0].column, "section " + words[0].text + " repeated");
      section = it->second;
      continue;
    }
    switch (section) {
      case Section::None: throw ScenarioError(line_no, words[0].column, "content before any section");
      case Section::Topology: parse_topology_line(s, words, line_no); break;
      case Section::Chain:
        for (const auto& w : words) parse_chain_line(s, w, line_no);
        break;
      case Section::Defaults:
        for (const auto& w : words) parse_defaults_line(s, w, line_no);
        break;
      case Section::Experiment:
        for (const auto& w : words) parse_experiment_line(s, w, line_no);
        break;
    }
  }

  const Experiment& e = s.experiment;
  if (e.distance_km.empty() != e.link_km.empty())
    throw ScenarioError(0, 0, "D and l must be given together");
  for (double l : e.link_km)
    if (!(l > 0)) throw ScenarioError(0, 0, "l values must be > 0");
  for (double d : e.distance_km)
    if (!(d > 0)) throw ScenarioError(0, 0, "D values must be > 0");
  if (e.distance_km.empty() && s.nodes.empty())
    throw ScenarioError(0, 0, "no topology: declare nodes in [topology] or give D and l");
  if (!e.distance_km.empty() && !s.nodes.empty())
    throw ScenarioError(0, 0, "give either a [topology] or D and l, not both");
  if (s.has_chain_link) check_link(resolve_link(s.chain_link, s.defaults.alpha_db_per_km), 0);
  if (!s.nodes.empty()) build_topology(s);  // semantic checks
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(0, 0, "cannot open scenario '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  std::string id = path;
  if (auto slash = id.find_last_of('/'); slash != std::string::npos) id = id.substr(slash + 1);
  if (auto dot = id.find_last_of('.'); dot != std::string::npos && dot > 0) id = id.substr(0, dot);
  return parse_scenario(ss.str(), id);
}

std::vector<GridPoint> grid_points(const Scenario& s) {
  const Experiment& e = s.experiment;
  std::vector<GridPoint> out{GridPoint{}};
  auto fmt = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%g", v);
    return std::string(b);
  };
  auto extend = [&](auto values, auto setter) {
    if (values.empty()) return;
    std::vector<GridPoint> next;
    for (const auto& g : out)
      for (auto v : values) {
        GridPoint h = g;
        setter(h, v);
        next.push_back(h);
      }
    out = std::move(next);
  };
  extend(e.distance_km, [](GridPoint& g, double v) { g.distance_km = v; });
  extend(e.link_km, [](GridPoint& g, double v) { g.link_km = v; });
  extend(e.qubits, [](GridPoint& g, std::uint32_t v) { g.qubits = v; });
  extend(e.collision_prob, [](GridPoint& g, double v) { g.collision_prob = v; });
  for (auto& g : out) {
    std::string l;
    auto add = [&](const std::string& part) { l += (l.empty() ? "" : ";") + part; };
    if (g.distance_km) add("D=" + fmt(*g.distance_km));
    if (g.link_km) add("l=" + fmt(*g.link_km));
    if (g.qubits) add("N_q=" + std::to_string(*g.qubits));
    if (g.collision_prob) add("P_col=" + fmt(*g.collision_prob));
    g.label = l.empty() ? "base" : l;
  }
  return out;
}

NetworkTopology build_topology(const Scenario& s) {
  NetworkTopology t;
  for (const auto& n : s.nodes) t.add_node(n.kind, n.name, n.mac);
  std::vector<std::size_t> link_lines;
  for (const auto& d : s.links) {
    auto a = t.find_node(d.a);
    auto b = t.find_node(d.b);
    if (!a) throw ScenarioError(d.line, 1, "link references unknown node '" + d.a + "'");
    if (!b) throw ScenarioError(d.line, 1, "link references unknown node '" + d.b + "'");
    const LinkParams p = resolve_link(d.link, s.defaults.alpha_db_per_km);
    check_link(p, d.line);
    t.add_link(*a, *b, d.classical, d.quantum, p);
    link_lines.push_back(d.line);
  }
  const auto violations = validate_topology(t);
  if (!violations.empty()) {
    const Violation& v = violations.front();
    // Point at the first declaration that involves the offending nodes.
    std::size_t line = 0;
    for (std::size_t i = 0; i < t.links().size() && !line; ++i) {
      const Link& l = t.link(i);
      if ((l.a == v.a && l.b == v.b) || (l.a == v.b && l.b == v.a)) line = link_lines[i];
    }
    if (!line && v.a < s.nodes.size()) line = s.nodes[v.a].line;
    throw ScenarioError(line, 1, std::string(to_string(v.kind)) + ": " + v.message);
  }
  return t;
}

std::size_t grid_switches(const Scenario& s, const GridPoint& g) {
  if (g.distance_km && g.link_km) return ChainParams::from_distance(*g.distance_km, *g.link_km, 1.0).switches;
  return sim::circuit_path(build_run(s, g)).size() - 2;
}

sim::RunSpec build_run(const Scenario& s, const GridPoint& g) {
  sim::RunSpec r;
  const Defaults& d = s.defaults;
  r.params.pkt.bits = d.bits;
  r.params.pkt.qubits = g.qubits.value_or(d.qubits);
  r.params.p_swap = d.p_swap;
  r.params.refractive_index = d.refractive_index;
  r.params.t_coherence = d.t_coherence;
  r.params.max_q_retries = d.max_q_retries;
  r.params.max_steps = d.max_steps;
  r.params.protocol.keepalive_period_s = d.t_keepalive;
  r.params.protocol.keepalive_miss_limit = d.k_miss;
  r.source = s.experiment.source;
  r.target = s.experiment.target;

  if (g.distance_km && g.link_km) {
    LinkTemplate t = s.chain_link;
    t.params.length_km = *g.link_km;
    if (g.collision_prob) t.params.collision_prob = *g.collision_prob;
    const LinkParams p = resolve_link(t, d.alpha_db_per_km);
    const std::size_t S = ChainParams::from_distance(*g.distance_km, *g.link_km, d.p_swap).switches;
    r.topology = make_chain(S, p);
    r.source = "alice";
    r.target = "bob";
    return r;
  }
  Scenario copy = s;
  if (g.collision_prob)
    for (auto& l : copy.links) l.link.params.collision_prob = *g.collision_prob;
  r.topology = build_topology(copy);
  for (const auto* name : {&r.source, &r.target}) {
    auto n = r.topology.find_node(*name);
    if (!n) throw ScenarioError(0, 0, "experiment names unknown user '" + *name + "'");
    if (r.topology.node(*n).kind != NodeKind::User)
      throw ScenarioError(0, 0, "'" + *name + "' is a switch, not a user");
  }
  return r;
}

}  // namespace qeth
