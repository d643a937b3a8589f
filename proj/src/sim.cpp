#include "qeth/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <queue>
#include <set>
#include <thread>

namespace qeth::sim {

namespace {

struct Event {
  double t;
  std::uint64_t seq;
  std::size_t node;
  proto::Input in;
};

struct Later {
  bool operator()(const Event& a, const Event& b) const {
    return a.t != b.t ? a.t > b.t : a.seq > b.seq;
  }
};

/// Nodes of the active path from `src` to `dst` (inclusive), or empty.
std::vector<std::size_t> active_path(const NetworkTopology& t, const ActiveTree& tree, std::size_t src,
                                     std::size_t dst) {
  std::vector<std::size_t> prev(t.nodes().size(), SIZE_MAX);
  std::deque<std::size_t> q{src};
  prev[src] = src;
  while (!q.empty()) {
    const std::size_t n = q.front();
    q.pop_front();
    if (n == dst) break;
    for (std::size_t li : t.ports(n)) {
      const Link& l = t.link(li);
      if (!std::binary_search(tree.active_links.begin(), tree.active_links.end(), li)) continue;
      const std::size_t m = l.other(n);
      // Users are endpoints only.
      if (prev[m] != SIZE_MAX || (m != dst && t.node(m).kind == NodeKind::User)) continue;
      prev[m] = n;
      q.push_back(m);
    }
  }
  if (prev[dst] == SIZE_MAX) return {};
  std::vector<std::size_t> path{dst};
  while (path.back() != src) path.push_back(prev[path.back()]);
  std::reverse(path.begin(), path.end());
  return path;
}

std::size_t link_between(const NetworkTopology& t, std::size_t a, std::size_t b) {
  for (std::size_t li : t.ports(a))
    if (t.link(li).other(a) == b && t.link(li).paired()) return li;
  throw SimError("no paired link between path nodes");
}

struct Resolved {
  std::size_t src, dst;
  ActiveTree tree;
  std::vector<std::size_t> path;
  std::size_t first_link;
};

Resolved resolve(const RunSpec& spec) {
  const auto& t = spec.topology;
  auto s = t.find_node(spec.source);
  auto d = t.find_node(spec.target);
  if (!s || !d) throw SimError("unknown source or target user");
  Resolved r{*s, *d, run_qstp(t), {}, 0};
  r.path = active_path(t, r.tree, r.src, r.dst);
  if (r.path.size() < 2) throw SimError("no active path between " + spec.source + " and " + spec.target);
  r.first_link = link_between(t, r.path[0], r.path[1]);
  return r;
}

class Engine {
 public:
  Engine(const RunSpec& spec, const Resolved& res, const Hooks& hooks, Rng& rng)
      : spec_(spec), topo_(spec.topology), res_(res), hooks_(hooks), rng_(rng) {
    const std::size_t n = topo_.nodes().size();
    proto::ProtocolConfig pc = spec.params.protocol;
    pc.qubits = spec.params.pkt.qubits;
    for (std::size_t i = 0; i < n; ++i) {
      proto::NodeConfig cfg;
      cfg.name = topo_.node(i).name;
      cfg.mac = topo_.node(i).mac;
      cfg.is_switch = topo_.node(i).kind == NodeKind::Switch;
      cfg.protocol = pc;
      ports_.push_back(topo_.ports(i));
      for (std::size_t p = 0; p < ports_[i].size(); ++p) {
        const Link& l = topo_.link(ports_[i][p]);
        cfg.ports.push_back({l.paired(), !l.paired() || res_.tree.is_forwarding(i, p)});
      }
      nodes_.emplace_back(std::move(cfg));
    }
    classical_fifo_.assign(topo_.links().size(), {0.0, 0.0});
    quantum_fifo_.assign(topo_.links().size(), {0.0, 0.0});
    killed_at_.assign(topo_.links().size(), std::numeric_limits<double>::infinity());
    for (auto [t, li] : hooks.link_kills)
      if (li < killed_at_.size()) killed_at_[li] = std::min(killed_at_[li], t);
    ready_seen_.resize(n);
  }

  RunResult run() {
    const auto& target_mac = topo_.node(res_.dst).mac;
    push(0.0, res_.src, proto::StartDiscovery{target_mac});
    while (!queue_.empty() && !done_) {
      if (++r_.steps > spec_.params.max_steps)
        throw MaxStepsExceeded("step cap " + std::to_string(spec_.params.max_steps) + " exceeded at t=" +
                               std::to_string(now_));
      Event e = queue_.top();
      queue_.pop();
      now_ = e.t;
      deliver(e);
    }
    return r_;
  }

 private:
  void push(double t, std::size_t node, proto::Input in) {
    queue_.push(Event{t, next_seq_++, node, std::move(in)});
  }

  void trace(TraceEvent ev) {
    if (!hooks_.trace) return;
    hooks_.trace(format_trace(ev));
  }

  const std::string& name(std::size_t n) const { return topo_.node(n).name; }

  void deliver(const Event& e) {
    if (hooks_.trace) {
      if (auto* f = std::get_if<proto::FrameIn>(&e.in))
        trace({now_, name(e.node), "rx", f->port, f->frame, f->frame.qp.e2e_id, ""});
      else if (auto* q = std::get_if<proto::QubitPacketIn>(&e.in))
        trace({now_, name(e.node), "qrx", q->port, std::nullopt, q->e2e_id,
               "qubits=" + std::to_string(q->received)});
    }
    const proto::Outputs outs = nodes_[e.node].step(now_, e.in);
    note_ready(e.node);
    for (const auto& o : outs) handle(e.node, o);
  }

  void note_ready(std::size_t node) {
    if (ptp_done_ || !est_done_) return;
    const auto& table = nodes_[node].state().entanglement_table;
    auto it = table.find(spec_.e2e_id);
    if (it == table.end()) return;
    const proto::Circuit& c = it->second;
    int bit = 0;
    for (const proto::CircuitSide* side : {&c.left, &c.right}) {
      ++bit;
      if (!side->port || side->phase != proto::PtpPhase::Ready) continue;
      if (ready_seen_[node] & bit) continue;
      ready_seen_[node] |= bit;
      if (++ready_endpoints_ == 2 * (res_.path.size() - 1)) {
        ptp_done_ = true;
        r_.ptp_s = now_ - est_time_;
      }
    }
  }

  void handle(std::size_t node, const proto::Output& o) {
    if (auto* f = std::get_if<proto::FrameOut>(&o)) return send_frame(node, *f);
    if (auto* q = std::get_if<proto::QubitPacketOut>(&o)) return send_qubits(node, *q);
    if (auto* t = std::get_if<proto::StartTimer>(&o)) {
      push(now_ + t->delay_s, node, proto::TimerExpired{t->kind, t->e2e_id, t->generation});
      return;
    }
    if (auto* s = std::get_if<proto::SwapAttempt>(&o)) {
      std::optional<bool> forced;
      if (hooks_.swap_oracle) forced = hooks_.swap_oracle(node, s->level);
      bool ok;
      if (forced) {
        ok = *forced;
      } else {
        std::bernoulli_distribution draw(spec_.params.p_swap);
        ok = spec_.params.p_swap >= 1.0 || draw(rng_);
      }
      r_.swaps.push_back({now_, node, s->level, ok});
      if (ok) r_.max_level = std::max(r_.max_level, s->level);
      trace({now_, name(node), "swap", std::nullopt, std::nullopt, s->e2e_id,
             "level=" + std::to_string(s->level) + (ok ? " ok" : " fail")});
      push(now_, node, proto::SwapAttemptResult{s->e2e_id, ok});
      return;
    }
    if (auto* n = std::get_if<proto::NotifyUser>(&o)) return notify(node, *n);
    if (auto* t = std::get_if<proto::TokenEvent>(&o)) {
      r_.tokens.push_back({now_, node, *t});
      trace({now_, name(node), "token", std::nullopt, std::nullopt, spec_.e2e_id,
             std::string(proto::to_string(t->change)) + " token=" + std::to_string(t->token_id) +
                 " level=" + std::to_string(t->level)});
      return;
    }
    if (auto* f = std::get_if<proto::Fault>(&o)) {
      r_.faults.push_back({now_, node, *f});
      trace({now_, name(node), "fault", std::nullopt, std::nullopt, spec_.e2e_id,
             std::string(proto::to_string(f->kind)) + " " + f->detail});
    }
  }

  void notify(std::size_t node, const proto::NotifyUser& n) {
    r_.notifications.push_back({now_, node, n.kind});
    trace({now_, name(node), "notify", std::nullopt, std::nullopt, n.e2e_id,
           std::string(proto::to_string(n.kind))});
    using proto::NotifyKind;
    switch (n.kind) {
      case NotifyKind::DiscoveryComplete:
        if (node == res_.src) {
          r_.discovery_s = now_;
          push(now_, res_.src, proto::StartEstablishment{topo_.node(res_.dst).mac, spec_.e2e_id});
        }
        break;
      case NotifyKind::EstablishmentComplete:
        if (node == res_.src) {
          est_done_ = true;
          est_time_ = now_;
          r_.establishment_s = now_ - r_.discovery_s;
          // Endpoints that turned Ready before this instant are picked up here.
          for (std::size_t i = 0; i < nodes_.size(); ++i) note_ready(i);
        }
        break;
      case NotifyKind::EntanglementReady:
        if (node == res_.src) src_ready_ = true;
        if (node == res_.dst) dst_ready_ = true;
        if (src_ready_ && dst_ready_) {
          r_.completed = true;
          r_.swap_protocol_s = now_ - est_time_;
          r_.total_s = now_;
          done_ = true;
        }
        break;
      case NotifyKind::DiscoveryFailed:
      case NotifyKind::EstablishmentTimeout:
      case NotifyKind::EstablishmentInterrupted:
        if (node == res_.src || node == res_.dst) {
          r_.total_s = now_;
          done_ = true;
        }
        break;
    }
  }

  void send_frame(std::size_t node, const proto::FrameOut& f) {
    const std::size_t li = ports_[node].at(f.port);
    const Link& l = topo_.link(li);
    const std::size_t peer = l.other(node);
    const std::size_t peer_port = *topo_.port_of(peer, li);
    const FrameBytes bytes = encode_frame(f.frame);
    QpFrame sent = f.frame;
    sent.eth.crc = decode_frame(bytes).eth.crc;
    const auto type = static_cast<std::size_t>(f.frame.qp.msg_type);
    ++r_.frames_by_type[type];
    trace({now_, name(node), "tx", f.port, sent, sent.qp.e2e_id, ""});
    if (killed_at_[li] <= now_) {
      trace({now_, name(node), "drop", f.port, sent, sent.qp.e2e_id, "link down"});
      return;
    }
    const ClassicalSample s =
        sample_classical(l.params, bytes, spec_.params.pkt.bits, spec_.params.refractive_index, rng_);
    r_.classical_retransmissions += s.attempts - 1;
    r_.undetected_corruptions += s.undetected;
    if (li == res_.first_link) r_.classical_samples.push_back(s.delay_s);
    double& last = classical_fifo_[li][node == l.a ? 0 : 1];
    const double arrive = std::max(now_ + s.delay_s, last);
    last = arrive;
    if (killed_at_[li] <= arrive) return;
    push(arrive, peer, proto::FrameIn{peer_port, sent});
    push(arrive, node, proto::FrameDelivered{f.port, sent});
  }

  void send_qubits(std::size_t node, const proto::QubitPacketOut& q) {
    const std::size_t li = ports_[node].at(q.port);
    const Link& l = topo_.link(li);
    const std::size_t peer = l.other(node);
    const std::size_t peer_port = *topo_.port_of(peer, li);
    trace({now_, name(node), "qtx", q.port, std::nullopt, q.e2e_id, "qubits=" + std::to_string(q.qubits)});
    if (killed_at_[li] <= now_) return;
    const QuantumSample s = sample_quantum(l.params, q.qubits, spec_.params.refractive_index,
                                           spec_.params.max_q_retries, rng_);
    r_.quantum_retransmissions += s.attempts - 1;
    if (li == res_.first_link) r_.quantum_samples.push_back(s.delay_s);
    if (s.received == 0) {
      push(now_ + s.delay_s, node, proto::QubitDeliveryFailed{q.port, q.e2e_id});
      return;
    }
    double& last = quantum_fifo_[li][node == l.a ? 0 : 1];
    const double arrive = std::max(now_ + s.delay_s, last);
    last = arrive;
    if (killed_at_[li] <= arrive) return;
    push(arrive, peer, proto::QubitPacketIn{peer_port, q.e2e_id, s.received});
  }

  const RunSpec& spec_;
  const NetworkTopology& topo_;
  const Resolved& res_;
  const Hooks& hooks_;
  Rng& rng_;
  std::vector<proto::Node> nodes_;
  std::vector<std::vector<std::size_t>> ports_;
  std::vector<std::array<double, 2>> classical_fifo_, quantum_fifo_;
  std::vector<double> killed_at_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t next_seq_ = 0;
  double now_ = 0.0;
  bool done_ = false, est_done_ = false, ptp_done_ = false, src_ready_ = false, dst_ready_ = false;
  double est_time_ = 0.0;
  std::vector<int> ready_seen_;
  std::size_t ready_endpoints_ = 0;
  RunResult r_;
};

RunResult run_protocol_with(const RunSpec& spec, const Resolved& res, Rng& rng, const Hooks& hooks) {
  Engine e(spec, res, hooks, rng);
  return e.run();
}

}  // namespace

RunResult run_protocol(const RunSpec& spec, std::uint64_t seed, const Hooks& hooks) {
  const Resolved res = resolve(spec);
  Rng rng(seed);
  return run_protocol_with(spec, res, rng, hooks);
}

ModelSample sample_swap_model(std::size_t switches, const LinkParams& link, const SimParams& p, Rng& rng) {
  ModelSample m;
  QpFrame probe;
  probe.qp.msg_type = MessageType::SwappingRequest;
  const FrameBytes bytes = encode_frame(probe);
  const double n = p.refractive_index;
  auto req = [&] { return sample_classical(link, bytes, p.pkt.bits, n, rng).delay_s; };
  auto round_ptp = [&] {
    double t = req() + req();
    const QuantumSample q = sample_quantum(link, p.pkt.qubits, n, p.max_q_retries, rng);
    t += q.delay_s + req();
    m.quantum_s += q.delay_s;
    return t;
  };
  if (switches <= 1) {
    m.swap_s = round_ptp();
    return m;
  }
  const std::size_t levels = switches / 2 + 1;
  std::bernoulli_distribution swap_ok(p.p_swap);
  for (;;) {
    m.swap_s += round_ptp();
    bool success = true;
    for (std::size_t w = 1; w <= levels; ++w) {
      const std::size_t exchanges = w <= 2 ? 2 : w - 1;
      for (std::size_t x = 0; x < 2 * exchanges; ++x) m.swap_s += req();
      if (!(p.p_swap >= 1.0 || swap_ok(rng))) {
        success = false;
        break;
      }
    }
    if (success) return m;
  }
}

Stat summarize(const std::vector<double>& xs) {
  Stat s;
  s.n = xs.size();
  if (xs.empty()) return s;
  double sum = 0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stderr_ = std::sqrt(ss / static_cast<double>(s.n - 1) / static_cast<double>(s.n));
  }
  return s;
}

namespace {

/// Compact per-replication outcome; aggregated in replication order.
struct Rep {
  bool completed = false;
  double discovery = 0, establishment = 0, ptp = 0, swap_protocol = 0, total = 0;
  double model = 0, model_q = 0;
  double packet = 0;  // per-packet modes
  std::vector<double> t_req, t_tq;
  std::array<std::uint64_t, kMessageTypeCount> frames{};
  std::uint64_t c_retx = 0, q_retx = 0, faults = 0;
  std::uint8_t max_level = 0;
};

const LinkParams& first_link(const RunSpec& spec, const Resolved& res) {
  return spec.topology.link(res.first_link).params;
}

Rep one_rep(const RunSpec& spec, const Resolved& res, Mode mode, std::uint64_t seed) {
  Rep r;
  Rng rng(seed);
  const SimParams& p = spec.params;
  const LinkParams& hop = first_link(spec, res);
  if (mode == Mode::Baseline) {
    r.packet = sample_baseline(hop, p.pkt.qubits, p.pkt.bits, p.refractive_index, rng).delay_s;
    r.completed = true;
    return r;
  }
  if (mode == Mode::HandshakePacket) {
    QpFrame probe;
    probe.qp.msg_type = MessageType::PtpEntanglementRequest;
    const FrameBytes bytes = encode_frame(probe);
    double t = 0;
    for (int i = 0; i < 3; ++i) t += sample_classical(hop, bytes, p.pkt.bits, p.refractive_index, rng).delay_s;
    t += sample_quantum(hop, p.pkt.qubits, p.refractive_index, p.max_q_retries, rng).delay_s;
    r.packet = t;
    r.completed = true;
    return r;
  }
  RunResult run = run_protocol_with(spec, res, rng, {});
  r.completed = run.completed;
  r.discovery = run.discovery_s;
  r.establishment = run.establishment_s;
  r.ptp = run.ptp_s;
  r.swap_protocol = run.swap_protocol_s;
  r.total = run.total_s;
  r.t_req = std::move(run.classical_samples);
  r.t_tq = std::move(run.quantum_samples);
  r.frames = run.frames_by_type;
  r.c_retx = run.classical_retransmissions;
  r.q_retx = run.quantum_retransmissions;
  r.faults = run.faults.size();
  r.max_level = run.max_level;
  const ModelSample m = sample_swap_model(res.path.size() - 2, hop, p, rng);
  r.model = m.swap_s;
  r.model_q = m.quantum_s;
  return r;
}

SimReport aggregate(const std::vector<Rep>& reps, Mode mode, double t_coherence) {
  SimReport out;
  out.n_reps = reps.size();
  std::vector<double> disc, est, ptp, swp, tot, model, model_q, treq, ttq;
  for (const Rep& r : reps) {
    if (r.completed) ++out.completed;
    if (mode != Mode::Proposed) {
      tot.push_back(r.packet);
      continue;
    }
    if (r.completed) {
      disc.push_back(r.discovery);
      est.push_back(r.establishment);
      ptp.push_back(r.ptp);
      swp.push_back(r.swap_protocol);
      tot.push_back(r.total);
    }
    model.push_back(r.model);
    model_q.push_back(r.model_q);
    treq.insert(treq.end(), r.t_req.begin(), r.t_req.end());
    ttq.insert(ttq.end(), r.t_tq.begin(), r.t_tq.end());
    for (std::size_t i = 0; i < kMessageTypeCount; ++i) out.frames_by_type[i] += r.frames[i];
    out.classical_retransmissions += r.c_retx;
    out.quantum_retransmissions += r.q_retx;
    out.faults += r.faults;
    out.max_level = std::max(out.max_level, r.max_level);
  }
  out.discovery = summarize(disc);
  out.establishment = summarize(est);
  out.ptp = summarize(ptp);
  out.swap_protocol = summarize(swp);
  out.total = summarize(tot);
  out.swap_model = summarize(model);
  out.model_quantum = summarize(model_q);
  out.t_req_sample = summarize(treq);
  out.t_tq_sample = summarize(ttq);
  if (out.swap_model.mean > 0) out.quantum_fraction = out.model_quantum.mean / out.swap_model.mean;
  out.swap_protocol_samples = mode == Mode::Proposed ? swp : tot;
  out.decoherence_violations = check_decoherence(out.swap_protocol_samples, t_coherence).violations;
  return out;
}

}  // namespace

unsigned thread_cap() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("QSWAP_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(std::min<long>(v, 256));
  }
  return hw;
}

SimReport monte_carlo(const RunSpec& spec, Mode mode, std::size_t n_reps, std::uint64_t base_seed,
                      unsigned max_threads) {
  if (n_reps == 0) throw SimError("n_reps must be at least 1");
  const Resolved res = resolve(spec);
  std::vector<Rep> reps(n_reps);
  const unsigned cap = max_threads ? max_threads : thread_cap();
  const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(cap, n_reps));
  std::vector<std::string> errors(threads);
  auto work = [&](unsigned tid) {
    for (std::size_t i = tid; i < n_reps; i += threads) {
      try {
        reps[i] = one_rep(spec, res, mode, base_seed + i);
      } catch (const std::exception& e) {
        errors[tid] = "replication " + std::to_string(i) + ": " + e.what();
        return;
      }
    }
  };
  if (threads <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (!e.empty()) throw SimError(e);
  return aggregate(reps, mode, spec.params.t_coherence);
}

SimReport run_proposed(const RunSpec& spec, std::uint64_t seed) {
  return monte_carlo(spec, Mode::Proposed, 1, seed);
}

SimReport run_baseline(const RunSpec& spec, std::uint64_t seed) {
  return monte_carlo(spec, Mode::Baseline, 1, seed);
}

SimReport run_handshake_packet(const RunSpec& spec, std::uint64_t seed) {
  return monte_carlo(spec, Mode::HandshakePacket, 1, seed);
}

DecoherenceSummary check_decoherence(const std::vector<double>& swap_delays, double t_coherence) {
  DecoherenceSummary d;
  d.total = swap_delays.size();
  for (std::size_t i = 0; i < swap_delays.size(); ++i)
    if (swap_delays[i] > t_coherence) d.flagged.push_back(i);
  d.violations = d.flagged.size();
  d.fraction = d.total ? static_cast<double>(d.violations) / static_cast<double>(d.total) : 0.0;
  return d;
}

std::vector<std::size_t> circuit_path(const RunSpec& spec) { return resolve(spec).path; }

std::vector<LinkParams> circuit_links(const RunSpec& spec) {
  const Resolved res = resolve(spec);
  std::vector<LinkParams> out;
  for (std::size_t i = 0; i + 1 < res.path.size(); ++i)
    out.push_back(spec.topology.link(link_between(spec.topology, res.path[i], res.path[i + 1])).params);
  return out;
}

RunSpec chain_spec(std::size_t switches, const LinkParams& link, const SimParams& params) {
  RunSpec s;
  s.topology = make_chain(switches, link);
  s.source = "alice";
  s.target = "bob";
  s.params = params;
  return s;
}

}  // namespace qeth::sim
