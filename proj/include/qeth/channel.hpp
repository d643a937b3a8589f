#pragma once

#include <cstdint>
#include <random>

#include "qeth/codec.hpp"
#include "qeth/topology.hpp"

namespace qeth {

using Rng = std::mt19937_64;

struct ClassicalSample {
  double delay_s = 0.0;
  unsigned attempts = 0;
  unsigned collisions = 0;
  unsigned corrupted = 0;   // attempts lost to bit errors (all caught by the CRC)
  unsigned undetected = 0;  // corrupted attempts the CRC failed to flag (still retried)
};

/// Retransmit-until-success over one classical link. Each attempt costs
/// T_bo + T_tb + T_prop; T_proc is added once. Bit errors are applied to the
/// encoded frame and must be rejected by decode_frame.
ClassicalSample sample_classical(const LinkParams& link, const FrameBytes& frame, double bits,
                                 double refractive_index, Rng& rng);

struct QuantumSample {
  double delay_s = 0.0;
  unsigned attempts = 0;
  std::uint32_t received = 0;  // 0 only when the retry limit was hit
};

/// Quantum packet of `qubits` with genie-aided resend until at least one survives.
QuantumSample sample_quantum(const LinkParams& link, std::uint32_t qubits, double refractive_index,
                             unsigned max_attempts, Rng& rng);

struct BaselineSample {
  double delay_s = 0.0;
  unsigned attempts = 0;
};

/// Header and qubits back-to-back; any failure resends both.
BaselineSample sample_baseline(const LinkParams& link, std::uint32_t qubits, double bits,
                               double refractive_index, Rng& rng);

}  // namespace qeth
