#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qeth/channel.hpp"
#include "qeth/codec.hpp"
#include "qeth/delay.hpp"
#include "qeth/protocols.hpp"
#include "qeth/topology.hpp"
#include "qeth/trace.hpp"

namespace qeth::sim {

struct SimParams {
  PacketParams pkt;
  double p_swap = 1.0;
  double refractive_index = 1.0;
  double t_coherence = std::numeric_limits<double>::infinity();
  unsigned max_q_retries = 100000;
  std::size_t max_steps = 10'000'000;
  proto::ProtocolConfig protocol;  // qubits is taken from pkt
};

/// One simulation input: a topology, the user pair to entangle, and parameters.
struct RunSpec {
  NetworkTopology topology;
  std::string source;
  std::string target;
  SimParams params;
  std::uint64_t e2e_id = 1;
};

class MaxStepsExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optional hooks for deterministic fault injection.
struct Hooks {
  /// Overrides the Bernoulli(P_swap) draw. Arguments: node index, level.
  std::function<std::optional<bool>(std::size_t, std::uint8_t)> swap_oracle;
  /// (time, link index): the link silently drops everything from that time on.
  std::vector<std::pair<double, std::size_t>> link_kills;
  /// Receives formatted trace lines.
  std::function<void(const std::string&)> trace;
};

struct NotifyRecord {
  double t;
  std::size_t node;
  proto::NotifyKind kind;
};

struct TokenRecord {
  double t;
  std::size_t node;
  proto::TokenEvent event;
};

struct FaultRecord {
  double t;
  std::size_t node;
  proto::Fault fault;
};

struct SwapRecord {
  double t;
  std::size_t node;
  std::uint8_t level;
  bool success;
};

/// Result of one protocol replication.
struct RunResult {
  bool completed = false;  // EntanglementReady at both users
  double discovery_s = 0, establishment_s = 0, ptp_s = 0, swap_protocol_s = 0, total_s = 0;
  std::array<std::uint64_t, kMessageTypeCount> frames_by_type{};
  std::uint64_t classical_retransmissions = 0;
  std::uint64_t quantum_retransmissions = 0;
  std::uint64_t undetected_corruptions = 0;
  std::vector<double> classical_samples;  // per delivered frame, one link
  std::vector<double> quantum_samples;
  std::vector<NotifyRecord> notifications;
  std::vector<TokenRecord> tokens;
  std::vector<FaultRecord> faults;
  std::vector<SwapRecord> swaps;
  std::uint8_t max_level = 0;  // highest successful swap level
  std::size_t steps = 0;
};

/// Event-driven execution of the full stack over one topology.
RunResult run_protocol(const RunSpec& spec, std::uint64_t seed, const Hooks& hooks = {});

/// Closed-form trial structure realised with sampled channel delays: restart
/// from scratch on any failed swap, per-level classical costs as in the model.
struct ModelSample {
  double swap_s = 0;
  double quantum_s = 0;
};
ModelSample sample_swap_model(std::size_t switches, const LinkParams& link, const SimParams& p, Rng& rng);

struct Stat {
  double mean = 0;
  double stderr_ = 0;
  std::size_t n = 0;
};

Stat summarize(const std::vector<double>& xs);

struct SimReport {
  std::size_t n_reps = 0;
  std::size_t completed = 0;
  Stat discovery, establishment, ptp, swap_protocol, total;
  Stat swap_model, model_quantum;
  Stat t_req_sample, t_tq_sample;
  double quantum_fraction = 0;  // mean model quantum time / mean model swap time
  std::array<std::uint64_t, kMessageTypeCount> frames_by_type{};
  std::uint64_t classical_retransmissions = 0;
  std::uint64_t quantum_retransmissions = 0;
  std::uint64_t faults = 0;
  std::size_t decoherence_violations = 0;
  std::uint8_t max_level = 0;
  std::vector<double> swap_protocol_samples;  // per replication, in seed order
};

/// One proposed-mode replication: protocol run plus one model sample.
SimReport run_proposed(const RunSpec& spec, std::uint64_t seed);

/// Baseline (header and qubits back-to-back) per-packet delay on the first
/// hop of the source user.
SimReport run_baseline(const RunSpec& spec, std::uint64_t seed);

/// Per-packet delay of the handshake mode on the same hop: the sampled ptp
/// exchange (request, reply, qubits, ack).
SimReport run_handshake_packet(const RunSpec& spec, std::uint64_t seed);

enum class Mode { Proposed, Baseline, HandshakePacket };

/// n_reps replications with seeds base_seed + i. `threads` = 0 means the
/// QSWAP_THREADS cap; the result does not depend on the thread count.
SimReport monte_carlo(const RunSpec& spec, Mode mode, std::size_t n_reps, std::uint64_t base_seed,
                      unsigned threads = 0);

struct DecoherenceSummary {
  std::size_t violations = 0;
  std::size_t total = 0;
  double fraction = 0;
  std::vector<std::size_t> flagged;  // replication indices
};

DecoherenceSummary check_decoherence(const std::vector<double>& swap_delays, double t_coherence);

/// Threads allowed by QSWAP_THREADS (default: hardware concurrency).
unsigned thread_cap();

/// Node indices of the active (Q-STP) path from source to target.
std::vector<std::size_t> circuit_path(const RunSpec& spec);

/// Link parameters along that path, in order.
std::vector<LinkParams> circuit_links(const RunSpec& spec);

/// Homogeneous chain run spec (users "alice" and "bob").
RunSpec chain_spec(std::size_t switches, const LinkParams& link, const SimParams& params);

}  // namespace qeth::sim
