#include "qeth/sweep.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <thread>

#include "qeth/delay.hpp"

namespace qeth {

namespace {

std::string num(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.10g", v);
  return b;
}

std::string point_id(const Scenario& s, const GridPoint& g) {
  return g.label == "base" ? s.id : s.id + "/" + g.label;
}

// Prefix errors with the grid point so the CLI can name it.
template <class F>
void at_point(const std::string& id, F&& f) {
  try {
    f();
  } catch (const ScenarioError& e) {
    throw ScenarioError(0, 0, "grid point " + id + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error("grid point " + id + ": " + e.what());
  }
}

}  // namespace

AnalyzeRow analyze_point(const Scenario& s, const GridPoint& g) {
  const sim::RunSpec run = build_run(s, g);
  const std::vector<LinkParams> links = sim::circuit_links(run);
  const PacketParams& pkt = run.params.pkt;
  const double n = run.params.refractive_index;

  ChainParams chain;
  chain.switches = links.size() - 1;
  chain.p_swap = run.params.p_swap;
  // The swap model assumes identical links; the first hop stands in for all.
  const DelayBreakdown b = t_swap(chain, links.front(), pkt, n);

  AnalyzeRow r;
  r.scenario_id = point_id(s, g);
  r.switches = chain.switches;
  r.levels = chain.levels();
  r.link_km = links.front().length_km;
  r.distance_km = 0;
  for (const auto& l : links) r.distance_km += l.length_km;
  if (g.distance_km) r.distance_km = *g.distance_km;
  r.qubits = pkt.qubits;
  r.p_swap = chain.p_swap;
  r.t_req = b.t_req;
  r.t_tq = b.t_tq;
  r.t_disc = t_disc(links, pkt, n);
  r.t_swap = b.t_swap;
  r.quantum_fraction = b.quantum_fraction;
  return r;
}

std::string analyze_csv(const Scenario& s) {
  std::string out = "scenario_id,S,V,l_km,D_km,N_q,P_swap,t_req_s,t_tq_s,t_disc_s,t_swap_s,quantum_fraction\n";
  for (const auto& g : grid_points(s)) {
    AnalyzeRow r;
    at_point(point_id(s, g), [&] { r = analyze_point(s, g); });
    out += r.scenario_id + "," + std::to_string(r.switches) + "," + std::to_string(r.levels) + "," +
           num(r.link_km) + "," + num(r.distance_km) + "," + std::to_string(r.qubits) + "," + num(r.p_swap) +
           "," + num(r.t_req) + "," + num(r.t_tq) + "," + num(r.t_disc) + "," + num(r.t_swap) + "," +
           num(r.quantum_fraction) + "\n";
  }
  return out;
}

std::string results_header() {
  return "scenario_id,mode,n_reps,mean_delay_s,stderr_s,quantum_fraction,decoherence_violations\n";
}

std::string format_result(const ResultRow& r) {
  return r.scenario_id + "," + r.mode + "," + std::to_string(r.n_reps) + "," + num(r.mean_delay_s) + "," +
         num(r.stderr_s) + "," + num(r.quantum_fraction) + "," + std::to_string(r.decoherence_violations) +
         "\n";
}

namespace {

ResultRow row_from(const std::string& id, const std::string& mode, std::size_t n_reps,
                   const sim::SimReport& rep, bool protocol) {
  ResultRow r;
  r.scenario_id = id;
  r.mode = mode;
  r.n_reps = n_reps;
  const sim::Stat& st = protocol ? rep.swap_protocol : rep.total;
  r.mean_delay_s = st.mean;
  r.stderr_s = st.stderr_;
  r.quantum_fraction = protocol ? rep.quantum_fraction : 0.0;
  r.decoherence_violations = rep.decoherence_violations;
  return r;
}

/// Fraction of the per-packet handshake spent on the quantum packet.
double packet_quantum_fraction(const sim::RunSpec& run) {
  const LinkParams link = sim::circuit_links(run).front();
  const double q = t_tq(link, run.params.pkt.qubits, run.params.refractive_index);
  const double c = t_req(link, run.params.pkt, run.params.refractive_index);
  return q / (q + 3 * c);
}


}  // namespace

std::vector<ResultRow> simulate_rows(const Scenario& s, std::size_t n_reps, std::uint64_t seed) {
  std::vector<ResultRow> rows;
  for (const auto& g : grid_points(s)) {
    at_point(point_id(s, g), [&] {
      const sim::RunSpec run = build_run(s, g);
      const auto rep = sim::monte_carlo(run, sim::Mode::Proposed, n_reps, seed);
      rows.push_back(row_from(point_id(s, g), "proposed", n_reps, rep, true));
    });
  }
  return rows;
}

std::vector<ResultRow> compare_rows(const Scenario& s, std::size_t n_reps, std::uint64_t seed) {
  std::vector<ResultRow> rows;
  for (const auto& g : grid_points(s)) {
    at_point(point_id(s, g), [&] {
      const sim::RunSpec run = build_run(s, g);
      const auto prop = sim::monte_carlo(run, sim::Mode::HandshakePacket, n_reps, seed);
      const auto base = sim::monte_carlo(run, sim::Mode::Baseline, n_reps, seed);
      ResultRow p = row_from(point_id(s, g), "proposed", n_reps, prop, false);
      p.quantum_fraction = packet_quantum_fraction(run);
      rows.push_back(p);
      rows.push_back(row_from(point_id(s, g), "baseline", n_reps, base, false));
    });
  }
  return rows;
}

namespace {

std::string sweep_point(const Scenario& s, const GridPoint& g) {
  const std::size_t n_reps = s.experiment.n_reps;
  const std::uint64_t seed = s.experiment.seed;
  auto opt = [](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
  std::string prefix = point_id(s, g) + "," + opt(g.distance_km) + "," + opt(g.link_km) + ",";

  std::string out;
  try {
    const sim::RunSpec run = build_run(s, g);
    const std::size_t S = sim::circuit_path(run).size() - 2;
    prefix += std::to_string(S) + "," + std::to_string(run.params.pkt.qubits) + "," +
              opt(g.collision_prob) + ",";
    for (const auto& mode : s.experiment.sweep_modes) {
      ResultRow r;
      if (mode == "analytic") {
        const AnalyzeRow a = analyze_point(s, g);
        r.mode = mode;
        r.mean_delay_s = a.t_swap;
        r.quantum_fraction = a.quantum_fraction;
        r.decoherence_violations = a.t_swap > run.params.t_coherence ? 1 : 0;
      } else if (mode == "proposed") {
        r = row_from("", mode, n_reps, sim::monte_carlo(run, sim::Mode::Proposed, n_reps, seed, 1), true);
      } else if (mode == "model") {
        const auto rep = sim::monte_carlo(run, sim::Mode::Proposed, n_reps, seed, 1);
        r = row_from("", mode, n_reps, rep, true);
        r.mean_delay_s = rep.swap_model.mean;
        r.stderr_s = rep.swap_model.stderr_;
      } else if (mode == "packet") {
        r = row_from("", mode, n_reps, sim::monte_carlo(run, sim::Mode::HandshakePacket, n_reps, seed, 1),
                     false);
        r.quantum_fraction = packet_quantum_fraction(run);
      } else {
        r = row_from("", mode, n_reps, sim::monte_carlo(run, sim::Mode::Baseline, n_reps, seed, 1), false);
      }
      out += prefix + r.mode + "," + std::to_string(r.n_reps) + "," + num(r.mean_delay_s) + "," +
             num(r.stderr_s) + "," + num(r.quantum_fraction) + "," + std::to_string(r.decoherence_violations) +
             ",\n";
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == ',' || c == '\n') c = ';';
    // Keep the column count fixed when the failure happened before S was known.
    const std::size_t commas = static_cast<std::size_t>(std::count(prefix.begin(), prefix.end(), ','));
    for (std::size_t i = commas; i < 6; ++i) prefix += ",";
    out = prefix + "error,0,,,,," + msg + "\n";
  }
  return out;
}

}  // namespace

std::string run_sweep(const Scenario& s) {
  const auto grid = grid_points(s);
  std::vector<std::string> chunks(grid.size());
  const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(sim::thread_cap(), grid.size()));
  auto work = [&](unsigned tid) {
    for (std::size_t i = tid; i < grid.size(); i += threads) chunks[i] = sweep_point(s, grid[i]);
  };
  if (threads <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  std::string out =
      "scenario_id,D_km,l_km,S,N_q,P_col,mode,n_reps,mean_delay_s,stderr_s,quantum_fraction,"
      "decoherence_violations,error\n";
  for (const auto& c : chunks) out += c;
  return out;
}

}  // namespace qeth
