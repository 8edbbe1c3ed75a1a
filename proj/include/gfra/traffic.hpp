#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "gfra/params.hpp"
#include "gfra/random.hpp"

namespace gfra {

using PacketId = std::int64_t;

// One packet copy: a W x Tp rectangle in the time-frequency plane.
struct Replica {
  PacketId packet = 0;
  double start_s = 0.0;
  double cfo_hz = 0.0;
  double duration_s = 0.0;
  double bandwidth_hz = 0.0;
  double energy_density = 1.0;

  double end_s() const { return start_s + duration_s; }
  double area() const { return duration_s * bandwidth_hz; }
};

// A device-local window of M slots carrying N replicas of one packet.
struct VirtualFrame {
  PacketId device = 0;
  double arrival_s = 0.0;
  std::vector<int> slots;  // sorted, slots.front() == 0
  double cfo_hz = 0.0;
};

// Slot 0 plus N-1 distinct slots drawn uniformly from {1..M-1}; one CFO for the
// whole frame.
inline VirtualFrame draw_virtual_frame(Rng& rng, const SystemParams& p, double arrival_s, PacketId device = 0) {
  require(p.replicas >= 1 && p.replicas <= p.vf_slots, "need 1 <= N <= M");
  VirtualFrame vf;
  vf.device = device;
  vf.arrival_s = arrival_s;
  vf.slots.reserve(static_cast<std::size_t>(p.replicas));
  vf.slots.push_back(0);
  if (p.replicas > 1) {
    // Partial Fisher-Yates over the remaining M-1 slots.
    std::vector<int> pool(static_cast<std::size_t>(p.vf_slots - 1));
    std::iota(pool.begin(), pool.end(), 1);
    for (int k = 0; k < p.replicas - 1; ++k) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k), pool.size() - 1);
      std::swap(pool[static_cast<std::size_t>(k)], pool[pick(rng)]);
      vf.slots.push_back(pool[static_cast<std::size_t>(k)]);
    }
    std::sort(vf.slots.begin(), vf.slots.end());
  }
  if (p.max_cfo_hz > 0.0) {
    std::uniform_real_distribution<double> cfo(-p.max_cfo_hz, p.max_cfo_hz);
    vf.cfo_hz = cfo(rng);
  }
  return vf;
}

inline std::vector<Replica> frame_replicas(const VirtualFrame& vf, const SystemParams& p, PacketId packet) {
  std::vector<Replica> out;
  out.reserve(vf.slots.size());
  for (int slot : vf.slots) {
    out.push_back(Replica{packet, vf.arrival_s + slot * p.packet_duration_s, vf.cfo_hz, p.packet_duration_s,
                          p.bandwidth_hz, 1.0});
  }
  return out;
}

// Ordered arrival instants of a homogeneous Poisson process on [0, horizon).
inline std::vector<double> generate_arrivals(Rng& rng, double rate, double horizon_s) {
  std::vector<double> out;
  if (rate <= 0.0 || horizon_s <= 0.0) return out;
  out.reserve(static_cast<std::size_t>(rate * horizon_s * 1.1) + 16);
  std::exponential_distribution<double> gap(rate);
  for (double t = gap(rng); t < horizon_s; t += gap(rng)) out.push_back(t);
  return out;
}

}  // namespace gfra
