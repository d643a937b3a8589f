#include <doctest.h>

#include <cmath>
#include <limits>

#include "qeth/channel.hpp"
#include "qeth/delay.hpp"
#include "qeth/sim.hpp"

using namespace qeth;

namespace {

constexpr double kN = 1.468;

LinkParams noisy(double km = 30) {
  LinkParams p;
  p.length_km = km;
  p.bit_error_prob = 1e-4;
  p.collision_prob = 0.2;
  p.qubit_loss_prob = fiber_loss_probability(km, 0.2);
  p.processing_s = 1e-6;
  p.backoff_s = 1e-5;
  return p;
}

template <class F>
sim::Stat sample_mean(std::size_t n, F&& draw) {
  std::vector<double> xs(n);
  for (auto& x : xs) x = draw();
  return sim::summarize(xs);
}

void check_within(const sim::Stat& s, double expected, double k = 4.0) {
  CAPTURE(s.mean);
  CAPTURE(expected);
  CAPTURE(s.stderr_);
  CHECK(std::abs(s.mean - expected) <= k * s.stderr_ + 1e-12 * expected);
}

}  // namespace

TEST_CASE("summarize") {
  const auto s = sim::summarize({1, 2, 3, 4});
  CHECK(s.mean == doctest::Approx(2.5));
  CHECK(s.stderr_ == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK(s.n == 4);
  CHECK(sim::summarize({}).n == 0);
}

TEST_CASE("classical channel mean matches t_req") {
  const LinkParams l = noisy();
  const FrameBytes frame = encode_frame(QpFrame{});
  Rng rng(1);
  unsigned undetected = 0;
  const auto s = sample_mean(20000, [&] {
    const auto c = sample_classical(l, frame, 320, kN, rng);
    undetected += c.undetected;
    return c.delay_s;
  });
  check_within(s, t_req(l, {}, kN));
  CHECK(undetected == 0);
}

TEST_CASE("quantum channel mean matches t_tq") {
  for (std::uint32_t q : {1u, 5u, 100u}) {
    const LinkParams l = noisy(60);
    Rng rng(q);
    const auto s = sample_mean(20000, [&] { return sample_quantum(l, q, kN, 1000000, rng).delay_s; });
    CAPTURE(q);
    check_within(s, t_tq(l, q, kN));
  }
}

TEST_CASE("quantum retry cap gives up") {
  LinkParams l = noisy();
  l.qubit_loss_prob = 1.0;
  Rng rng(1);
  const auto s = sample_quantum(l, 3, kN, 7, rng);
  CHECK(s.received == 0);
  CHECK(s.attempts == 7);
}

TEST_CASE("baseline mean matches its geometric closed form") {
  const LinkParams l = noisy(40);
  const std::uint32_t q = 4;
  const double prop = t_prop(40, kN);
  const double attempt = std::max(320 / l.classical_rate_bps + prop, q / l.quantum_rate_qbps + prop);
  const double p = p_sb(l.collision_prob, l.bit_error_prob, 320) * (1 - std::pow(l.qubit_loss_prob, q));
  const double expected = attempt / p + l.backoff_s * (1 / p - 1) + l.processing_s;
  Rng rng(9);
  check_within(sample_mean(20000, [&] { return sample_baseline(l, q, 320, kN, rng).delay_s; }), expected);
}

TEST_CASE("swap model mean matches the closed form") {
  sim::SimParams p;
  p.refractive_index = kN;
  for (double ps : {1.0, 0.6}) {
    for (std::size_t s : {2u, 5u}) {
      p.p_swap = ps;
      ChainParams c;
      c.switches = s;
      c.p_swap = ps;
      const LinkParams l = noisy();
      Rng rng(s * 10 + static_cast<unsigned>(ps * 10));
      const auto st = sample_mean(20000, [&] { return sim::sample_swap_model(s, l, p, rng).swap_s; });
      CAPTURE(s);
      CAPTURE(ps);
      check_within(st, t_swap(c, l, {}, kN).t_swap);
    }
  }
}

TEST_CASE("monte carlo is independent of the thread count") {
  sim::SimParams p;
  p.p_swap = 0.7;
  p.refractive_index = kN;
  const auto spec = sim::chain_spec(3, noisy(), p);
  const auto a = sim::monte_carlo(spec, sim::Mode::Proposed, 40, 11, 1);
  const auto b = sim::monte_carlo(spec, sim::Mode::Proposed, 40, 11, 4);
  CHECK(a.swap_protocol_samples == b.swap_protocol_samples);
  CHECK(a.swap_model.mean == b.swap_model.mean);
  CHECK(a.frames_by_type == b.frames_by_type);
  CHECK(a.completed == 40);
}

TEST_CASE("decoherence check") {
  SUBCASE("infinite coherence never flags") {
    const auto d = sim::check_decoherence({1, 2, 3}, std::numeric_limits<double>::infinity());
    CHECK(d.violations == 0);
    CHECK(d.fraction == 0);
  }
  SUBCASE("deterministic run against half its delay") {
    const auto spec = sim::chain_spec(2, LinkParams{.length_km = 10}, {});
    const auto rep = sim::monte_carlo(spec, sim::Mode::Proposed, 5, 1);
    const double t = rep.swap_protocol_samples.front();
    const auto d = sim::check_decoherence(rep.swap_protocol_samples, t / 2);
    CHECK(d.violations == 5);
    CHECK(d.fraction == 1.0);
  }
  SUBCASE("flags exactly the tail") {
    const auto d = sim::check_decoherence({0.5, 1.5, 1.0, 2.0}, 1.0);
    CHECK(d.flagged == std::vector<std::size_t>{1, 3});
    CHECK(d.fraction == 0.5);
  }
}

TEST_CASE("report counts decoherence violations per replication") {
  sim::SimParams p;
  p.p_swap = 0.5;
  p.refractive_index = kN;
  const auto spec0 = sim::chain_spec(4, noisy(), p);
  const auto probe = sim::monte_carlo(spec0, sim::Mode::Proposed, 200, 3);
  std::vector<double> sorted = probe.swap_protocol_samples;
  std::sort(sorted.begin(), sorted.end());
  p.t_coherence = sorted[150];
  const auto rep = sim::monte_carlo(sim::chain_spec(4, noisy(), p), sim::Mode::Proposed, 200, 3);
  CHECK(rep.decoherence_violations == 49);
}

TEST_CASE("handshake packet vs baseline on the first hop") {
  LinkParams l = noisy(50);
  l.quantum_rate_qbps = 500;
  l.collision_prob = 0.3;
  sim::SimParams p;
  p.refractive_index = kN;
  const auto spec = sim::chain_spec(1, l, p);
  const auto prop = sim::monte_carlo(spec, sim::Mode::HandshakePacket, 4000, 1);
  const auto base = sim::monte_carlo(spec, sim::Mode::Baseline, 4000, 1);
  check_within(prop.total, 3 * t_req(l, {}, kN) + t_tq(l, 1, kN));
  CHECK(prop.total.mean < base.total.mean);
}

TEST_CASE("step cap raises") {
  sim::SimParams p;
  p.max_steps = 50;
  CHECK_THROWS_AS(sim::run_protocol(sim::chain_spec(4, LinkParams{.length_km = 1}, p), 1), sim::MaxStepsExceeded);
}
