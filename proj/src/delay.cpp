#include "qeth/delay.hpp"

#include <algorithm>
#include <cmath>

namespace qeth {

ChainParams ChainParams::from_distance(double distance_km, double link_km, double p_swap) {
  ChainParams c;
  c.distance_km = distance_km;
  c.link_km = link_km;
  c.p_swap = p_swap;
  // Guard the ceiling against representation noise (400/40 must give 10).
  const double ratio = distance_km / link_km;
  const double nearest = std::round(ratio);
  c.switches = static_cast<std::size_t>(std::abs(ratio - nearest) < 1e-9 ? nearest : std::ceil(ratio));
  return c;
}

double fiber_loss_probability(double length_km, double attenuation_db_per_km) {
  return 1.0 - std::pow(10.0, -attenuation_db_per_km * length_km / 10.0);
}

double t_tb(double bits, double rate_bps) { return bits / rate_bps; }

double t_prop(double length_km, double refractive_index) {
  return length_km * 1000.0 * refractive_index / kSpeedOfLight;
}

double p_sb(double collision_prob, double bit_error_prob, double bits) {
  return (1.0 - collision_prob) * std::pow(1.0 - bit_error_prob, bits);
}

double t_req(const LinkParams& link, const PacketParams& pkt, double refractive_index) {
  const double success = p_sb(link.collision_prob, link.bit_error_prob, pkt.bits);
  if (!(success > 0.0))
    throw DelayError(DelayErrorKind::ZeroSuccessProbability, "classical success probability is zero");
  const double attempt =
      link.backoff_s + t_tb(pkt.bits, link.classical_rate_bps) + t_prop(link.length_km, refractive_index);
  return attempt / success + link.processing_s;
}

double t_tq(const LinkParams& link, std::uint32_t qubits, double refractive_index) {
  const double success = 1.0 - std::pow(link.qubit_loss_prob, static_cast<double>(qubits));
  if (!(success > 0.0))
    throw DelayError(DelayErrorKind::ZeroSuccessProbability, "every qubit is lost (P_q = 1)");
  const double attempt = qubits / link.quantum_rate_qbps + t_prop(link.length_km, refractive_index);
  return attempt / success + link.processing_s;
}

namespace {

void require_links(std::span<const LinkParams> links) {
  if (links.empty()) throw DelayError(DelayErrorKind::EmptyLinks, "at least one link is required");
}

}  // namespace

double t_disc(std::span<const LinkParams> links, const PacketParams& pkt, double refractive_index) {
  require_links(links);
  double sum = 0.0;
  for (const auto& l : links) sum += t_req(l, pkt, refractive_index) + t_ack(l, pkt, refractive_index);
  return sum;
}

double t_est_lower_bound(std::span<const LinkParams> links, const PacketParams& pkt,
                         double refractive_index) {
  return t_disc(links, pkt, refractive_index);
}

double t_er(std::span<const LinkParams> links, const PacketParams& pkt, double refractive_index) {
  require_links(links);
  double worst = 0.0;
  for (const auto& l : links) worst = std::max(worst, 2.0 * t_req(l, pkt, refractive_index));
  return worst;
}

double t_ptp(std::span<const LinkParams> links, const PacketParams& pkt, double refractive_index) {
  require_links(links);
  double worst = 0.0;
  for (const auto& l : links)
    worst = std::max(worst, t_tq(l, pkt.qubits, refractive_index) + t_ack(l, pkt, refractive_index));
  return worst;
}

double t_error(std::size_t level, std::size_t max_level, std::span<const LinkParams> links,
               const PacketParams& pkt, double refractive_index) {
  if (level < 1 || level > max_level)
    throw DelayError(DelayErrorKind::LevelOutOfRange,
                     "level " + std::to_string(level) + " outside [1," + std::to_string(max_level) + "]");
  if (links.size() < level)
    throw DelayError(DelayErrorKind::EmptyLinks, "fewer links than notified hops");
  double sum = 0.0;
  for (std::size_t l = 0; l < level; ++l)
    sum += t_req(links[l], pkt, refractive_index) + t_ack(links[l], pkt, refractive_index);
  return sum;
}

DelayBreakdown t_swap(const ChainParams& chain, const LinkParams& link, const PacketParams& pkt,
                      double refractive_index) {
  if (!(chain.p_swap > 0.0) || chain.p_swap > 1.0)
    throw DelayError(DelayErrorKind::InvalidPSwap, "P_swap must lie in (0,1]");

  DelayBreakdown b;
  b.t_req = t_req(link, pkt, refractive_index);
  b.t_ack = b.t_req;
  b.t_tb = t_tb(pkt.bits, link.classical_rate_bps);
  b.t_prop = t_prop(link.length_km, refractive_index);
  b.t_tq = t_tq(link, pkt.qubits, refractive_index);

  const std::size_t hops = chain.switches + 1;
  const std::vector<LinkParams> path(std::max<std::size_t>(hops, chain.levels()), link);
  const std::span<const LinkParams> on_path(path.data(), hops);
  b.t_disc = t_disc(on_path, pkt, refractive_index);
  b.t_est_lower_bound = b.t_disc;
  b.t_er = t_er(on_path, pkt, refractive_index);
  b.t_ptp = t_ptp(on_path, pkt, refractive_index);

  const std::size_t levels = chain.levels();
  for (std::size_t v = 1; v <= levels; ++v)
    b.t_error_by_level.push_back(t_error(v, levels, path, pkt, refractive_index));
  b.t_comp = b.t_error_by_level.back();

  if (chain.switches <= 1) {
    b.t_swap = b.t_er + b.t_ptp;
    b.quantum_time = b.t_tq;
  } else {
    const double n = chain.trials();
    const auto v_cap = static_cast<double>(levels);
    const double n_v = std::pow(n, v_cap);
    const double n_v1 = std::pow(n, v_cap - 1.0);
    double tail = 0.0;
    for (std::size_t v = 1; v + 2 <= levels; ++v)
      tail += static_cast<double>(v + 1) * std::pow(n, v_cap - static_cast<double>(v) - 1.0);
    b.quantum_time = b.t_tq * n_v;
    b.t_swap = b.quantum_time + b.t_req * (7.0 * n_v + 4.0 * n_v1) + 2.0 * b.t_req * tail;
  }
  b.quantum_fraction = b.quantum_time / b.t_swap;
  return b;
}

}  // namespace qeth
