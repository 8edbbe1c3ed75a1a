#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <ostream>
#include <queue>
#include <random>
#include <vector>

#include "gfra/collision.hpp"
#include "gfra/error.hpp"
#include "gfra/kpi.hpp"
#include "gfra/params.hpp"
#include "gfra/random.hpp"
#include "gfra/sic.hpp"
#include "gfra/traffic.hpp"

namespace gfra {

struct TrialConfig {
  DecodeRule rule;
  int max_retries = 5;
  // Statistics window. Negative values select the defaults: 2 M Tp at the start,
  // and at the end enough time for every retry of a packet plus 2 M Tp.
  double warmup_s = -1.0;
  double tail_s = -1.0;
  // Per-device channel-inversion power from random positions in the annulus
  // [Rin, Rc]; otherwise every device uses the cell-average power.
  bool per_device_power = true;
  bool clamp_power = false;
  bool collect_overlap = false;  // record the raw aggregate overlap of each counted replica
  std::ostream* trace = nullptr; // JSON lines, one per event
};

struct TrialResult {
  KpiReport kpi;
  bool applicable = false;  // false when no packet fell in the window
  std::size_t packets = 0;
  std::size_t delivered = 0;
  std::size_t dropped = 0;
  std::size_t attempts = 0;
  std::size_t failed_attempts = 0;
  double window_s = 0.0;
  double offered_load = 0.0;  // measured W / (2Fm + W) g Tp
  double success_probability() const { return attempts ? 1.0 - double(failed_attempts) / double(attempts) : 0.0; }
  std::vector<double> overlap_samples;
};

namespace detail {

inline std::vector<double> device_powers(Rng& rng, const SystemParams& p, const EnergyParams& e, bool per_device,
                                         bool clamp) {
  const int n = std::max(e.device_count, 1);
  std::vector<double> pt(static_cast<std::size_t>(n), avg_transmit_power(e, p));
  if (!per_device) return pt;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r0 = e.inner_radius_m * e.inner_radius_m;
  const double r1 = e.cell_radius_m * e.cell_radius_m;
  for (auto& v : pt) {
    const double r = std::sqrt(r0 + u(rng) * (r1 - r0));
    v = tx_power_at(r, p, e);
    if (clamp) v = clamp_tx_power(v, e);
  }
  return pt;
}

inline double warmup_span(const SystemParams& p, const TrialConfig& cfg) {
  return cfg.warmup_s >= 0.0 ? cfg.warmup_s : 2.0 * p.vf_duration();
}

inline double tail_span(const SystemParams& p, const TrialConfig& cfg) {
  if (cfg.tail_s >= 0.0) return cfg.tail_s;
  const double vf = p.vf_duration();
  return (cfg.max_retries + 1) * (vf + p.ack_wait_s + p.retry_backoff_s) + 2.0 * vf;
}

inline void window_bounds(const SystemParams& p, const TrialConfig& cfg, double horizon_s, double& lo, double& hi) {
  lo = warmup_span(p, cfg);
  hi = horizon_s - tail_span(p, cfg);
  if (!(hi > lo)) throw InvalidArgument("horizon too short for the warm-up and drain windows");
}

}  // namespace detail

// Event-driven simulation of grant-free access over [0, horizon). The receiver
// decodes causally: a replica becomes usable when it ends, decoded packets are
// cancelled immediately and every attempt touched by a cancellation is re-tested.
// An attempt that is not decoded by VF end + Tack fails; the device retries with a
// fresh virtual frame and CFO, up to `max_retries` times.
inline TrialResult run_trial(Rng& rng, double lambda, double horizon_s, const SystemParams& p,
                             const EnergyParams& e, const TrialConfig& cfg = {}) {
  if (lambda < 0.0) throw InvalidArgument("negative arrival rate");
  validate(p);
  double win_lo, win_hi;
  detail::window_bounds(p, cfg, horizon_s, win_lo, win_hi);

  const auto powers = detail::device_powers(rng, p, e, cfg.per_device_power, cfg.clamp_power);
  std::uniform_int_distribution<std::size_t> pick_device(0, powers.size() - 1);

  struct Packet {
    double arrival = 0.0;
    int attempts = 0;
    bool delivered = false;
    double delivered_at = 0.0;
    double energy = 0.0;
    std::size_t device = 0;
    bool counted = false;
  };
  struct Attempt {
    int packet = 0;
    double start = 0.0;
    std::vector<int> reps;
    bool decoded = false;
    bool closed = false;
  };
  enum EvType : int { kReplicaEnd = 0, kDeadline = 1, kReplicaStart = 2, kArrival = 3, kRetry = 4 };
  struct Ev {
    double t;
    int type;
    int id;
    std::uint64_t seq;
    bool operator>(const Ev& o) const {
      if (t != o.t) return t > o.t;
      if (type != o.type) return type > o.type;
      return seq > o.seq;
    }
  };

  std::vector<Packet> packets;
  std::vector<Attempt> attempts;
  CollisionGraph graph;
  std::vector<int> rep_attempt;
  std::vector<char> cancelled, received;
  std::vector<int> on_air;
  std::priority_queue<Ev, std::vector<Ev>, std::greater<Ev>> queue;
  std::uint64_t seq = 0;
  auto push = [&](double t, int type, int id) { queue.push(Ev{t, type, id, seq++}); };

  auto trace = [&](const char* what, double t, int packet, int attempt, int replica) {
    if (!cfg.trace) return;
    *cfg.trace << "{\"t\":" << t << ",\"ev\":\"" << what << "\",\"packet\":" << packet << ",\"attempt\":" << attempt
               << ",\"replica\":" << replica << "}\n";
  };

  for (double t : generate_arrivals(rng, lambda, horizon_s)) {
    Packet pk;
    pk.arrival = t;
    pk.device = pick_device(rng);
    pk.counted = t >= win_lo && t < win_hi;
    packets.push_back(pk);
    push(t, kArrival, static_cast<int>(packets.size()) - 1);
  }

  auto start_attempt = [&](int pkt, double t) {
    Packet& pk = packets[pkt];
    ++pk.attempts;
    pk.energy += attempt_energy(e, p, powers[pk.device]);
    VirtualFrame vf = draw_virtual_frame(rng, p, t, static_cast<PacketId>(pk.device));
    Attempt a;
    a.packet = pkt;
    a.start = t;
    const int id = static_cast<int>(attempts.size());
    for (const Replica& r : frame_replicas(vf, p, static_cast<PacketId>(id))) {
      const int rid = graph.add(r);
      rep_attempt.push_back(id);
      cancelled.push_back(0);
      received.push_back(0);
      a.reps.push_back(rid);
      push(r.start_s, kReplicaStart, rid);
    }
    attempts.push_back(std::move(a));
    push(t + p.vf_duration() + p.ack_wait_s, kDeadline, id);
    trace("attempt", t, pkt, id, -1);
  };

  // Packet id -> its attempt ids, for cancelling earlier copies on success.
  std::vector<std::vector<int>> packet_attempts;
  packet_attempts.resize(packets.size());

  std::uniform_real_distribution<double> backoff(0.0, p.retry_backoff_s);

  std::deque<int> work;
  auto decode_attempt = [&](int a, double t) {
    Attempt& at = attempts[a];
    at.decoded = true;
    Packet& pk = packets[at.packet];
    if (!pk.delivered) {
      pk.delivered = true;
      pk.delivered_at = std::max(t, at.start + p.vf_duration());
    }
    trace("decode", t, at.packet, a, -1);
    for (int other : packet_attempts[at.packet]) {
      for (int r : attempts[other].reps) {
        if (cancelled[r]) continue;
        if (graph.replica(r).start_s > t) continue;  // cancelled when it starts
        cancelled[r] = 1;
        for (const auto& o : graph.neighbours(r)) {
          const int oa = rep_attempt[o.other];
          if (!attempts[oa].decoded && !attempts[oa].closed) work.push_back(oa);
        }
      }
    }
  };
  auto try_decode = [&](int a, double t) {
    work.push_back(a);
    while (!work.empty()) {
      const int cur = work.front();
      work.pop_front();
      const Attempt& at = attempts[cur];
      if (at.decoded || at.closed) continue;
      if (packet_decodable(graph, at.reps, cancelled, &received, p, cfg.rule)) decode_attempt(cur, t);
    }
  };

  std::vector<double> overlap_samples;
  while (!queue.empty()) {
    const Ev ev = queue.top();
    queue.pop();
    switch (ev.type) {
      case kRetry:
      case kArrival:
        if (ev.type == kArrival) trace("arrival", ev.t, ev.id, -1, -1);
        packet_attempts[ev.id].push_back(static_cast<int>(attempts.size()));
        start_attempt(ev.id, ev.t);
        break;
      case kReplicaStart: {
        const int r = ev.id;
        std::erase_if(on_air, [&](int j) { return graph.replica(j).end_s() <= ev.t; });
        for (int j : on_air) graph.connect(j, r);
        on_air.push_back(r);
        if (packets[attempts[rep_attempt[r]].packet].delivered) cancelled[r] = 1;
        push(graph.replica(r).end_s(), kReplicaEnd, r);
        trace("start", ev.t, attempts[rep_attempt[r]].packet, rep_attempt[r], r);
        break;
      }
      case kReplicaEnd: {
        const int r = ev.id;
        received[r] = 1;
        const int a = rep_attempt[r];
        if (cfg.collect_overlap && packets[attempts[a].packet].counted) {
          double m = 0.0;
          for (const auto& o : graph.neighbours(r)) m += o.area;
          overlap_samples.push_back(m);
        }
        trace("end", ev.t, attempts[a].packet, a, r);
        if (!cancelled[r]) try_decode(a, ev.t);
        break;
      }
      case kDeadline: {
        Attempt& at = attempts[ev.id];
        at.closed = true;
        if (at.decoded) break;
        Packet& pk = packets[at.packet];
        trace("fail", ev.t, at.packet, ev.id, -1);
        if (pk.delivered) break;
        if (pk.attempts <= cfg.max_retries) {
          const double t = ev.t + (p.retry_backoff_s > 0.0 ? backoff(rng) : 0.0);
          push(t, kRetry, at.packet);
        } else {
          trace("drop", ev.t, at.packet, ev.id, -1);
        }
        break;
      }
    }
  }

  TrialResult res;
  res.window_s = win_hi - win_lo;
  double delay_sum = 0.0, report_energy = 0.0, attempt_energy_sum = 0.0, power_sum = 0.0;
  for (std::size_t i = 0; i < packets.size(); ++i) {
    const Packet& pk = packets[i];
    if (!pk.counted) continue;
    ++res.packets;
    res.attempts += static_cast<std::size_t>(pk.attempts);
    res.failed_attempts += static_cast<std::size_t>(pk.attempts - (pk.delivered ? 1 : 0));
    if (pk.delivered) {
      ++res.delivered;
      delay_sum += pk.delivered_at - pk.arrival;
    } else {
      ++res.dropped;
    }
    report_energy += e.static_energy_j + pk.energy;
    attempt_energy_sum += pk.energy;
    power_sum += powers[pk.device];
  }
  res.overlap_samples = std::move(overlap_samples);
  res.applicable = res.packets > 0;
  KpiReport& k = res.kpi;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (!res.applicable) {
    k.outage = k.expected_delay_s = k.battery_lifetime_s = k.energy_efficiency = nan;
    k.spectral_efficiency = k.spectral_efficiency_success = k.throughput = 0.0;
    k.avg_tx_power_w = nan;
    return res;
  }
  const double n = static_cast<double>(res.packets);
  k.outage = double(res.failed_attempts) / double(res.attempts);
  k.expected_delay_s = res.delivered ? delay_sum / double(res.delivered) : std::numeric_limits<double>::infinity();
  k.battery_lifetime_s = e.battery_j * e.report_period_s / (report_energy / n);
  k.energy_efficiency = double(res.delivered) * (p.packet_bits - p.overhead_bits) / attempt_energy_sum;
  const double lambda_hat = n / res.window_s;
  k.spectral_efficiency = spectral_efficiency(lambda_hat, p);
  k.spectral_efficiency_success = (1.0 - k.outage) * k.spectral_efficiency;
  k.throughput = double(res.delivered) / res.window_s;
  k.avg_tx_power_w = power_sum / n;
  res.offered_load = p.load_from_rate(double(res.attempts) * p.replicas / res.window_s);
  return res;
}

// ---------------------------------------------------------------------------
// Granted-access baseline.

// Number of devices that alone picked their RA opportunity.
inline int ra_singletons(Rng& rng, int contenders, int opportunities) {
  if (contenders <= 0) return 0;
  std::vector<int> hits(static_cast<std::size_t>(opportunities), 0);
  std::uniform_int_distribution<int> pick(0, opportunities - 1);
  for (int i = 0; i < contenders; ++i) ++hits[static_cast<std::size_t>(pick(rng))];
  return static_cast<int>(std::count(hits.begin(), hits.end(), 1));
}

struct GrantedResult {
  KpiReport kpi;
  bool applicable = false;
  std::size_t packets = 0;
  std::size_t delivered = 0;
  std::size_t dropped = 0;
  std::size_t ra_attempts = 0;
  std::size_t ra_collisions = 0;
  double window_s = 0.0;
};

// Reports wait for the next RA instant, where every pending device picks one of
// R preambles. Singletons get a grant, synchronise for Dsynch and send once
// without collision; the others retry at the next RA instant.
inline GrantedResult run_granted_baseline(Rng& rng, double lambda, double horizon_s, const SystemParams& p,
                                          const EnergyParams& e, const TrialConfig& cfg = {}) {
  if (lambda < 0.0) throw InvalidArgument("negative arrival rate");
  validate(e);
  const double period = e.ra_period_s;
  const double lo = cfg.warmup_s >= 0.0 ? cfg.warmup_s : 2.0 * period;
  const double hi = horizon_s - (cfg.tail_s >= 0.0 ? cfg.tail_s : 2.0 * period);
  if (!(hi > lo)) throw InvalidArgument("horizon too short for the warm-up and drain windows");

  const auto powers = detail::device_powers(rng, p, e, cfg.per_device_power, cfg.clamp_power);
  std::uniform_int_distribution<std::size_t> pick_device(0, powers.size() - 1);
  std::uniform_int_distribution<int> pick(0, e.ra_opportunities - 1);

  struct Report {
    double arrival;
    std::size_t device;
    int attempts = 0;
    double energy = 0.0;
    bool delivered = false;
    double delay = 0.0;
  };
  std::vector<Report> reports;
  for (double t : generate_arrivals(rng, lambda, horizon_s)) reports.push_back({t, pick_device(rng)});

  std::vector<int> pending;
  std::size_t next = 0;
  std::vector<int> choice;
  std::vector<int> hits(static_cast<std::size_t>(e.ra_opportunities));
  for (long k = 1; next < reports.size() || !pending.empty(); ++k) {
    const double t = k * period;
    while (next < reports.size() && reports[next].arrival < t) pending.push_back(static_cast<int>(next++));
    if (pending.empty()) continue;
    std::fill(hits.begin(), hits.end(), 0);
    choice.resize(pending.size());
    for (std::size_t i = 0; i < pending.size(); ++i) {
      choice[i] = pick(rng);
      ++hits[static_cast<std::size_t>(choice[i])];
    }
    std::vector<int> still;
    for (std::size_t i = 0; i < pending.size(); ++i) {
      Report& r = reports[static_cast<std::size_t>(pending[i])];
      const double pt = powers[r.device];
      ++r.attempts;
      r.energy += granted_ra_energy(e, pt);
      if (hits[static_cast<std::size_t>(choice[i])] == 1) {
        r.delivered = true;
        r.energy += granted_delivery_energy(e, p, pt);
        r.delay = t - r.arrival + e.sync_delay_s + p.packet_duration_s;
      } else if (r.attempts < e.ra_max_attempts) {
        still.push_back(pending[i]);
      }
    }
    pending.swap(still);
  }

  GrantedResult res;
  res.window_s = hi - lo;
  double delay_sum = 0.0, energy_sum = 0.0, power_sum = 0.0;
  for (const Report& r : reports) {
    if (r.arrival < lo || r.arrival >= hi) continue;
    ++res.packets;
    res.ra_attempts += static_cast<std::size_t>(r.attempts);
    res.ra_collisions += static_cast<std::size_t>(r.attempts - (r.delivered ? 1 : 0));
    if (r.delivered) {
      ++res.delivered;
      delay_sum += r.delay;
    } else {
      ++res.dropped;
    }
    energy_sum += r.energy;
    power_sum += powers[r.device];
  }
  res.applicable = res.packets > 0;
  KpiReport& k = res.kpi;
  if (!res.applicable) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    k.outage = k.expected_delay_s = k.battery_lifetime_s = k.energy_efficiency = k.avg_tx_power_w = nan;
    return res;
  }
  const double n = static_cast<double>(res.packets);
  k.outage = double(res.dropped) / n;
  k.expected_delay_s = res.delivered ? delay_sum / double(res.delivered) : std::numeric_limits<double>::infinity();
  k.battery_lifetime_s = e.battery_j * e.report_period_s / (e.static_energy_j + energy_sum / n);
  k.energy_efficiency = double(res.delivered) * (p.packet_bits - p.overhead_bits) / energy_sum;
  k.spectral_efficiency = spectral_efficiency(n / res.window_s, p);
  k.spectral_efficiency_success = (1.0 - k.outage) * k.spectral_efficiency;
  k.throughput = double(res.delivered) / res.window_s;
  k.avg_tx_power_w = power_sum / n;
  return res;
}

}  // namespace gfra
