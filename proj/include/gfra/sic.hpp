#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "gfra/collision.hpp"
#include "gfra/interference.hpp"
#include "gfra/params.hpp"
#include "gfra/policy.hpp"

namespace gfra {

struct DecodeRule {
  CombiningPolicy policy = CombiningPolicy::MaxRatio;
  double coding_rate = 1.0;  // Cr, clean fraction needed by fragment combining
};

// Aggregate overlap area on replica r from replicas that are still present.
inline double replica_interference(const CollisionGraph& g, int r, const std::vector<char>& cancelled) {
  double m = 0.0;
  for (const auto& o : g.neighbours(r))
    if (!cancelled[o.other]) m += o.area;
  return m;
}

namespace detail {

using Intervals = std::vector<std::pair<double, double>>;

inline Intervals merge(Intervals v) {
  std::sort(v.begin(), v.end());
  Intervals out;
  for (const auto& iv : v) {
    if (!out.empty() && iv.first <= out.back().second) {
      out.back().second = std::max(out.back().second, iv.second);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

inline Intervals intersect(const Intervals& a, const Intervals& b) {
  Intervals out;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double lo = std::max(a[i].first, b[j].first);
    const double hi = std::min(a[i].second, b[j].second);
    if (lo < hi) out.emplace_back(lo, hi);
    (a[i].second < b[j].second) ? ++i : ++j;
  }
  return out;
}

// Part of the packet (in packet-relative time) hit by any remaining interferer.
inline Intervals covered_span(const CollisionGraph& g, int r, const std::vector<char>& cancelled) {
  const Replica& me = g.replica(r);
  Intervals v;
  for (const auto& o : g.neighbours(r)) {
    if (cancelled[o.other]) continue;
    const Replica& other = g.replica(o.other);
    v.emplace_back(std::max(other.start_s, me.start_s) - me.start_s, std::min(other.end_s(), me.end_s()) - me.start_s);
  }
  return merge(std::move(v));
}

}  // namespace detail

// Whether the packet carried by `reps` can be decoded from the replicas received
// so far. `received` may be null when every replica is complete.
//   none: some replica alone reaches St.
//   sc:   as none, or the union of interference-free fragments covers a
//         fraction >= Cr of the packet.
//   mrc:  the sum of the replica SINRs reaches St.
inline bool packet_decodable(const CollisionGraph& g, std::span<const int> reps, const std::vector<char>& cancelled,
                             const std::vector<char>* received, const SystemParams& p, const DecodeRule& rule) {
  const double limit = p.sinr_threshold * (1.0 - kThresholdSlack);
  double sum = 0.0;
  bool any = false;
  for (int r : reps) {
    if (received && !(*received)[r]) continue;
    any = true;
    const double s = sinr(replica_interference(g, r, cancelled), p);
    if (s >= limit && rule.policy != CombiningPolicy::MaxRatio) return true;
    sum += s;
  }
  if (!any) return false;
  if (rule.policy == CombiningPolicy::MaxRatio) return sum >= limit;
  if (rule.policy == CombiningPolicy::None) return false;

  const double tp = g.replica(reps.front()).duration_s;
  detail::Intervals covered{{0.0, tp}};
  for (int r : reps) {
    if (received && !(*received)[r]) continue;
    covered = detail::intersect(covered, detail::covered_span(g, r, cancelled));
    if (covered.empty()) break;
  }
  double hit = 0.0;
  for (const auto& iv : covered) hit += iv.second - iv.first;
  return (tp - hit) / tp >= rule.coding_rate * (1.0 - kThresholdSlack);
}

struct SicOutcome {
  std::vector<PacketId> decoded;             // in decoding order
  int rounds = 0;                            // rounds that decoded at least one packet
  std::map<PacketId, double> delay_s;        // decode instant minus first replica start
  std::size_t residual_replicas = 0;
  std::vector<std::size_t> decoded_per_round;
};

// Offline SIC over a complete graph. Each round tests every remaining packet
// against the current residual interference, then cancels all packets that
// passed. A packet is taken to be decoded once its last replica has ended and the
// packets whose cancellation it relied on are decoded.
inline SicOutcome sic_decode(const CollisionGraph& g, const SystemParams& p, const DecodeRule& rule,
                             int max_rounds = 1000) {
  std::map<PacketId, std::vector<int>> by_packet;
  for (std::size_t i = 0; i < g.size(); ++i) by_packet[g.packet_of(static_cast<int>(i))].push_back(static_cast<int>(i));

  std::vector<char> cancelled(g.size(), 0);
  std::vector<double> done_at(g.size(), 0.0);  // decode instant per replica, if cancelled
  SicOutcome out;
  std::vector<PacketId> pending;
  for (const auto& kv : by_packet) pending.push_back(kv.first);

  for (int round = 0; round < max_rounds && !pending.empty(); ++round) {
    std::vector<PacketId> now;
    for (PacketId id : pending)
      if (packet_decodable(g, by_packet[id], cancelled, nullptr, p, rule)) now.push_back(id);
    if (now.empty()) break;
    std::vector<std::pair<PacketId, double>> stamps;
    for (PacketId id : now) {
      double t = 0.0, first = 1e300;
      for (int r : by_packet[id]) {
        t = std::max(t, g.replica(r).end_s());
        first = std::min(first, g.replica(r).start_s);
        for (const auto& o : g.neighbours(r))
          if (cancelled[o.other]) t = std::max(t, done_at[o.other]);
      }
      stamps.emplace_back(id, t);
      out.delay_s[id] = t - first;
    }
    for (const auto& [id, t] : stamps) {
      for (int r : by_packet[id]) {
        cancelled[r] = 1;
        done_at[r] = t;
      }
      out.decoded.push_back(id);
    }
    out.decoded_per_round.push_back(now.size());
    ++out.rounds;
    std::erase_if(pending, [&](PacketId id) { return cancelled[by_packet[id].front()]; });
  }
  for (char c : cancelled) out.residual_replicas += c ? 0 : 1;
  return out;
}

}  // namespace gfra
