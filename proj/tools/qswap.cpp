// qswap: scenario validation, Q-STP, analysis, simulation and sweeps.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "qeth/codec.hpp"
#include "qeth/scenario.hpp"
#include "qeth/sim.hpp"
#include "qeth/sweep.hpp"
#include "qeth/topology.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kScenarioError = 1;
constexpr int kRuntimeFault = 2;

const char* kFormatHelp = R"(Scenario file format (line oriented, '#' starts a comment):

[topology]
  user <name> <mac>
  switch <name> <mac>
  link <a> <b> classical [quantum] d=<km> rb=<bps> rq=<qbps> pb=<p> pq=<p|auto>
       tproc=<s> tbo=<s> pcol=<p> cc=<cost> cq=<cost>
[chain]        link keys except d; used to generate a user-S switches-user chain
               with S = ceil(D/l) when the experiment sets D and l
[defaults]
  N_b=320            classical frame size in bits
  N_q=1              qubits per quantum packet
  P_swap=1           entanglement swapping success probability
  t_coherence=inf    qubit coherence time (s)
  n=1                fiber refractive index
  alpha=0.2          fiber attenuation (dB/km), used by pq=auto
  t_keepalive=0.1    keep-alive period (s)
  k_miss=3           missed keep-alives before a circuit is interrupted
  max_q_retries=100000
  max_steps=10000000 event cap per replication
[experiment]
  mode=analyze|simulate|compare|sweep   source=alice target=bob
  n_reps=1 seed=1
  D=<km axis> l=<km axis> P_col=<axis> N_q=<axis>   axis: a,b,c or start:stop:step
  sweep_modes=analytic,proposed   (any of analytic, proposed, model, packet, baseline)

Link defaults: rb=1e9 rq=1e6 pb=0 pq=0 tproc=0 tbo=0 pcol=0 cc=1 cq=0.
Exit codes: 0 ok, 1 scenario or input error, 2 runtime fault.
QSWAP_THREADS caps parallelism.)";

void write_out(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

int cmd_validate(const std::string& path) {
  const qeth::Scenario s = qeth::load_scenario(path);
  const auto grid = qeth::grid_points(s);
  if (!s.nodes.empty()) {
    const auto topo = qeth::build_topology(s);
    const auto bad = qeth::validate_topology(topo);
    for (const auto& v : bad) std::cerr << path << ": " << v.message << "\n";
    if (!bad.empty()) return kScenarioError;
  }
  for (const auto& g : grid) {
    try {
      qeth::build_run(s, g);
    } catch (const qeth::ScenarioError& e) {
      throw qeth::ScenarioError(0, 0, "grid point " + g.label + ": " + e.what());
    }
  }
  std::cout << s.id << ": ok (" << s.nodes.size() << " nodes, " << s.links.size() << " links, "
            << grid.size() << " grid points)\n";
  return kOk;
}

int cmd_qstp(const std::string& path) {
  const qeth::Scenario s = qeth::load_scenario(path);
  if (s.nodes.empty()) throw qeth::ScenarioError(0, 0, path + ": no [topology] section");
  const auto topo = qeth::build_topology(s);
  const auto tree = qeth::run_qstp(topo);
  std::cout << "root " << topo.node(tree.root).name << " " << qeth::format_mac(topo.node(tree.root).mac) << "\n";
  char cost[40];
  std::snprintf(cost, sizeof cost, "%.10g", tree.total_cost(topo));
  std::cout << "cost " << cost << "\n";
  for (std::size_t li : tree.active_links) {
    const auto& l = topo.link(li);
    std::cout << "active " << topo.node(l.a).name << " " << topo.node(l.b).name << "\n";
  }
  for (const auto& [key, st] : tree.port_states) {
    const auto li = topo.ports(key.first).at(key.second);
    std::cout << "port " << topo.node(key.first).name << " " << key.second << " -> "
              << topo.node(topo.link(li).other(key.first)).name << " "
              << (st == qeth::PortState::Forwarding ? "forwarding" : "blocked") << "\n";
  }
  return kOk;
}

std::string rows_csv(const std::vector<qeth::ResultRow>& rows) {
  std::string out = qeth::results_header();
  for (const auto& r : rows) out += qeth::format_result(r);
  return out;
}

// Trace of the first replication of every grid point.
std::string trace_text(const qeth::Scenario& s, std::uint64_t seed) {
  std::string out;
  for (const auto& g : qeth::grid_points(s)) {
    out += "# " + (g.label == "base" ? s.id : s.id + "/" + g.label) + "\n";
    const auto run = qeth::build_run(s, g);
    qeth::sim::Hooks hooks;
    hooks.trace = [&](const std::string& line) { out += line + "\n"; };
    qeth::sim::run_protocol(run, seed, hooks);
  }
  return out;
}

int cmd_decode(const std::string& hex) {
  const auto bytes = qeth::from_hex(hex);
  std::cout << qeth::describe(qeth::decode_frame(bytes)) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qswap: entanglement swapping over Ethernet, analysis and simulation"};
  app.footer(kFormatHelp);
  app.require_subcommand(1);

  std::string scenario, out, trace, hex;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;

  auto* validate = app.add_subcommand("validate", "Parse and check a scenario");
  validate->add_option("scenario", scenario)->required();
  auto* qstp = app.add_subcommand("qstp", "Print the Q-STP active tree");
  qstp->add_option("scenario", scenario)->required();
  auto* analyze = app.add_subcommand("analyze", "Closed-form delays per grid point (CSV)");
  analyze->add_option("scenario", scenario)->required();
  analyze->add_option("--out", out, "CSV output file");

  auto add_mc = [&](CLI::App* c) {
    c->add_option("scenario", scenario)->required();
    c->add_option("--seed", seed, "Base seed (default: scenario seed)")->each([&](const std::string&) {
      seed_set = true;
    });
    c->add_option("--reps", reps, "Replications (default: scenario n_reps)");
    c->add_option("--out", out, "CSV output file");
  };
  auto* simulate = app.add_subcommand("simulate", "Protocol Monte Carlo (CSV)");
  add_mc(simulate);
  simulate->add_option("--trace", trace, "Trace of the first replication per grid point");
  auto* compare = app.add_subcommand("compare", "Proposed per-packet handshake vs baseline (CSV)");
  add_mc(compare);
  auto* sweep = app.add_subcommand("sweep", "Run the experiment grid (CSV)");
  sweep->add_option("scenario", scenario)->required();
  sweep->add_option("--out", out, "CSV output file");
  auto* decode = app.add_subcommand("decode", "Decode one hex frame line");
  decode->add_option("hexline", hex)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kScenarioError;
  }

  try {
    if (*validate) return cmd_validate(scenario);
    if (*qstp) return cmd_qstp(scenario);
    if (*decode) return cmd_decode(hex);

    qeth::Scenario s = qeth::load_scenario(scenario);
    if (*analyze) {
      write_out(out, qeth::analyze_csv(s));
    } else if (*sweep) {
      write_out(out, qeth::run_sweep(s));
    } else {
      const std::size_t n = reps ? reps : s.experiment.n_reps;
      const std::uint64_t sd = seed_set ? seed : s.experiment.seed;
      if (*simulate) {
        if (!trace.empty()) write_out(trace, trace_text(s, sd));
        write_out(out, rows_csv(qeth::simulate_rows(s, n, sd)));
      } else {
        write_out(out, rows_csv(qeth::compare_rows(s, n, sd)));
      }
    }
    return kOk;
  } catch (const qeth::ScenarioError& e) {
    std::cerr << "qswap: " << scenario << ": " << e.what() << "\n";
    return kScenarioError;
  } catch (const qeth::DecodeError& e) {
    std::cerr << "qswap: decode: " << e.what() << "\n";
    return kScenarioError;
  } catch (const std::exception& e) {
    std::cerr << "qswap: " << e.what() << "\n";
    return kRuntimeFault;
  }
}
