#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qeth/topology.hpp"

namespace qeth {

inline constexpr double kSpeedOfLight = 2.99792458e8;  // m/s

struct PacketParams {
  double bits = 320.0;         // N_b; one 40-byte QP frame by default
  std::uint32_t qubits = 1;    // N_q
};

/// Swap chain description. Derived quantities follow the sequential swapping
/// scheme: V = floor(S/2) + 1 levels, N_t = 1 / P_swap trials per swap.
struct ChainParams {
  std::size_t switches = 0;  // S
  double p_swap = 1.0;
  double distance_km = 0.0;  // D (informational when built from S directly)
  double link_km = 0.0;      // l

  std::size_t levels() const { return switches / 2 + 1; }
  double trials() const { return 1.0 / p_swap; }

  /// S = ceil(D / l).
  static ChainParams from_distance(double distance_km, double link_km, double p_swap);
};

enum class DelayErrorKind { ZeroSuccessProbability, InvalidPSwap, LevelOutOfRange, EmptyLinks };

class DelayError : public std::runtime_error {
 public:
  DelayError(DelayErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  DelayErrorKind kind() const { return kind_; }

 private:
  DelayErrorKind kind_;
};

/// Qubit loss over fiber: 1 - 10^(-alpha d / 10).
double fiber_loss_probability(double length_km, double attenuation_db_per_km);

double t_tb(double bits, double rate_bps);
double t_prop(double length_km, double refractive_index = 1.0);
double p_sb(double collision_prob, double bit_error_prob, double bits);

/// Mean classical request (or ack) delay over one link, geometric retransmissions.
double t_req(const LinkParams& link, const PacketParams& pkt, double refractive_index = 1.0);
inline double t_ack(const LinkParams& link, const PacketParams& pkt, double refractive_index = 1.0) {
  return t_req(link, pkt, refractive_index);
}

/// Mean quantum packet delay; success needs at least one surviving qubit.
double t_tq(const LinkParams& link, std::uint32_t qubits, double refractive_index = 1.0);

double t_disc(std::span<const LinkParams> links, const PacketParams& pkt, double refractive_index = 1.0);
double t_est_lower_bound(std::span<const LinkParams> links, const PacketParams& pkt,
                         double refractive_index = 1.0);
double t_er(std::span<const LinkParams> links, const PacketParams& pkt, double refractive_index = 1.0);
double t_ptp(std::span<const LinkParams> links, const PacketParams& pkt, double refractive_index = 1.0);

/// Error notification delay at level v: request+ack over the first v links.
double t_error(std::size_t level, std::size_t max_level, std::span<const LinkParams> links,
               const PacketParams& pkt, double refractive_index = 1.0);

struct DelayBreakdown {
  double t_req = 0, t_ack = 0, t_tb = 0, t_prop = 0, t_tq = 0;
  double t_disc = 0, t_est_lower_bound = 0, t_er = 0, t_ptp = 0;
  std::vector<double> t_error_by_level;  // index v-1
  double t_comp = 0;
  double t_swap = 0;
  double quantum_time = 0;  // t_tq * N_t^V (t_tq when S <= 1)
  double quantum_fraction = 0;
};

/// End-to-end swap delay for a homogeneous chain.
DelayBreakdown t_swap(const ChainParams& chain, const LinkParams& link, const PacketParams& pkt,
                      double refractive_index = 1.0);

}  // namespace qeth
