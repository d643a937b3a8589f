#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "qeth/scenario.hpp"
#include "qeth/sim.hpp"

namespace qeth {

/// Closed-form figures for one grid point.
struct AnalyzeRow {
  std::string scenario_id;
  std::size_t switches = 0, levels = 0;
  double link_km = 0, distance_km = 0;
  std::uint32_t qubits = 1;
  double p_swap = 1;
  double t_req = 0, t_tq = 0, t_disc = 0, t_swap = 0, quantum_fraction = 0;
};

AnalyzeRow analyze_point(const Scenario& s, const GridPoint& g);
std::string analyze_csv(const Scenario& s);

/// One results row: mode is proposed or baseline (simulate/compare), or any
/// sweep mode (analytic, proposed, model, packet, baseline).
struct ResultRow {
  std::string scenario_id;
  std::string mode;
  std::size_t n_reps = 0;
  double mean_delay_s = 0, stderr_s = 0, quantum_fraction = 0;
  std::size_t decoherence_violations = 0;
};

std::string results_header();
std::string format_result(const ResultRow& r);

/// `simulate`: protocol Monte Carlo per grid point.
std::vector<ResultRow> simulate_rows(const Scenario& s, std::size_t n_reps, std::uint64_t seed);
/// `compare`: per-packet handshake (proposed) and baseline per grid point.
std::vector<ResultRow> compare_rows(const Scenario& s, std::size_t n_reps, std::uint64_t seed);

/// Sweep over the grid. Output columns:
/// scenario_id,D_km,l_km,S,N_q,P_col,mode,n_reps,mean_delay_s,stderr_s,quantum_fraction,decoherence_violations,error
/// Grid points run in parallel (QSWAP_THREADS); the text does not depend on it.
std::string run_sweep(const Scenario& s);

}  // namespace qeth
