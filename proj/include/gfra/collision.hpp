#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <tuple>
#include <vector>

#include "gfra/params.hpp"
#include "gfra/traffic.hpp"

namespace gfra {

// Exact intersection area of two time-frequency rectangles. A replica occupies
// [start, end) x [cfo - W/2, cfo + W/2].
inline double replica_overlap(const Replica& a, const Replica& b) {
  const double dt = std::min(a.end_s(), b.end_s()) - std::max(a.start_s, b.start_s);
  if (dt <= 0.0) return 0.0;
  const double df = std::min(a.cfo_hz + 0.5 * a.bandwidth_hz, b.cfo_hz + 0.5 * b.bandwidth_hz) -
                    std::max(a.cfo_hz - 0.5 * a.bandwidth_hz, b.cfo_hz - 0.5 * b.bandwidth_hz);
  if (df <= 0.0) return 0.0;
  return dt * df;
}

struct Overlap {
  int other = 0;
  double area = 0.0;
};

// Replicas plus the sparse symmetric overlap relation between them.
class CollisionGraph {
 public:
  int add(const Replica& r) {
    replicas_.push_back(r);
    adjacency_.emplace_back();
    return static_cast<int>(replicas_.size()) - 1;
  }

  // Records the overlap between a and b if it is non-zero.
  bool connect(int a, int b) {
    if (a == b) return false;
    const double area = replica_overlap(replicas_[a], replicas_[b]);
    if (area <= 0.0) return false;
    adjacency_[a].push_back({b, area});
    adjacency_[b].push_back({a, area});
    ++edges_;
    return true;
  }

  std::size_t size() const { return replicas_.size(); }
  std::size_t edge_count() const { return edges_; }
  const Replica& replica(int i) const { return replicas_[i]; }
  const std::vector<Replica>& replicas() const { return replicas_; }
  PacketId packet_of(int i) const { return replicas_[i].packet; }
  const std::vector<Overlap>& neighbours(int i) const { return adjacency_[i]; }

  double overlap(int a, int b) const {
    for (const auto& o : adjacency_[a])
      if (o.other == b) return o.area;
    return 0.0;
  }

  // (a, b, area) with a < b, sorted.
  std::vector<std::tuple<int, int, double>> edges() const {
    std::vector<std::tuple<int, int, double>> out;
    out.reserve(edges_);
    for (std::size_t a = 0; a < adjacency_.size(); ++a)
      for (const auto& o : adjacency_[a])
        if (static_cast<int>(a) < o.other) out.emplace_back(static_cast<int>(a), o.other, o.area);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::vector<Replica> replicas_;
  std::vector<std::vector<Overlap>> adjacency_;
  std::size_t edges_ = 0;
};

// Sweep over start times: each replica is only compared with those still on air
// when it starts, so the cost is linear in replicas plus overlapping pairs.
inline CollisionGraph build_collision_graph(const std::vector<Replica>& replicas) {
  std::vector<int> order(replicas.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return replicas[a].start_s < replicas[b].start_s; });
  CollisionGraph g;
  for (const auto& r : replicas) g.add(r);
  std::vector<int> active;
  for (int i : order) {
    const double t = replicas[i].start_s;
    std::erase_if(active, [&](int j) { return replicas[j].end_s() <= t; });
    for (int j : active) g.connect(j, i);
    active.push_back(i);
  }
  return g;
}

// Packet id of frame k is k.
inline CollisionGraph build_collision_graph(const std::vector<VirtualFrame>& frames, const SystemParams& p) {
  std::vector<Replica> all;
  all.reserve(frames.size() * static_cast<std::size_t>(p.replicas));
  for (std::size_t k = 0; k < frames.size(); ++k) {
    auto reps = frame_replicas(frames[k], p, static_cast<PacketId>(k));
    all.insert(all.end(), reps.begin(), reps.end());
  }
  return build_collision_graph(all);
}

}  // namespace gfra
