#include "qeth/channel.hpp"

#include <algorithm>
#include <set>

#include "qeth/delay.hpp"

namespace qeth {

namespace {

/// True when the attempt's bits arrive intact. Corrupts a copy of the frame
/// and checks that the CRC rejects it.
bool bits_survive(const LinkParams& link, const FrameBytes& frame, double bits, Rng& rng,
                  ClassicalSample* tally) {
  if (link.bit_error_prob <= 0.0) return true;
  std::binomial_distribution<long> errors(static_cast<long>(bits), link.bit_error_prob);
  const long k = errors(rng);
  if (k == 0) return true;
  if (tally) {
    ++tally->corrupted;
    // Errors beyond the 320 frame bits land in padding; flip what fits.
    const long flips = std::min<long>(k, static_cast<long>(kFrameBits));
    std::uniform_int_distribution<std::size_t> pos(0, kFrameBits - 1);
    std::set<std::size_t> picked;
    while (static_cast<long>(picked.size()) < flips) picked.insert(pos(rng));
    FrameBytes bad = frame;
    for (auto p : picked) bad[p / 8] ^= static_cast<std::uint8_t>(1u << (7 - p % 8));
    try {
      decode_frame(bad);
      ++tally->undetected;
    } catch (const DecodeError&) {
    }
  }
  return false;
}

}  // namespace

ClassicalSample sample_classical(const LinkParams& link, const FrameBytes& frame, double bits,
                                 double refractive_index, Rng& rng) {
  ClassicalSample s;
  const double attempt = link.backoff_s + t_tb(bits, link.classical_rate_bps) +
                         t_prop(link.length_km, refractive_index);
  std::bernoulli_distribution collide(link.collision_prob);
  for (;;) {
    ++s.attempts;
    s.delay_s += attempt;
    if (link.collision_prob > 0.0 && collide(rng)) {
      ++s.collisions;
      continue;
    }
    if (bits_survive(link, frame, bits, rng, &s)) break;
  }
  s.delay_s += link.processing_s;
  return s;
}

QuantumSample sample_quantum(const LinkParams& link, std::uint32_t qubits, double refractive_index,
                             unsigned max_attempts, Rng& rng) {
  QuantumSample s;
  const double attempt = qubits / link.quantum_rate_qbps + t_prop(link.length_km, refractive_index);
  std::binomial_distribution<std::uint32_t> survive(qubits, 1.0 - link.qubit_loss_prob);
  while (s.attempts < max_attempts) {
    ++s.attempts;
    s.delay_s += attempt;
    s.received = link.qubit_loss_prob > 0.0 ? survive(rng) : qubits;
    if (s.received > 0) break;
  }
  s.delay_s += link.processing_s;
  return s;
}

BaselineSample sample_baseline(const LinkParams& link, std::uint32_t qubits, double bits,
                               double refractive_index, Rng& rng) {
  BaselineSample s;
  const double prop = t_prop(link.length_km, refractive_index);
  const double attempt = std::max(t_tb(bits, link.classical_rate_bps) + prop,
                                  qubits / link.quantum_rate_qbps + prop);
  std::bernoulli_distribution collide(link.collision_prob);
  std::binomial_distribution<long> errors(static_cast<long>(bits), link.bit_error_prob);
  std::binomial_distribution<std::uint32_t> survive(qubits, 1.0 - link.qubit_loss_prob);
  for (;;) {
    ++s.attempts;
    s.delay_s += attempt;
    const bool collided = link.collision_prob > 0.0 && collide(rng);
    const bool corrupted = link.bit_error_prob > 0.0 && errors(rng) > 0;
    const bool lost = link.qubit_loss_prob > 0.0 && survive(rng) == 0;
    if (!collided && !corrupted && !lost) break;
    s.delay_s += link.backoff_s;
  }
  s.delay_s += link.processing_s;
  return s;
}

}  // namespace qeth
