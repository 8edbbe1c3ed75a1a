#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "gfra/params.hpp"
#include "gfra/random.hpp"
#include "gfra/sigchain/receiver.hpp"
#include "gfra/sweep.hpp"

namespace gfra::sig {

// Synthetic scenarios: packets at random offsets in an 8000-sample buffer with
// uniform CFO and random carrier phase, plus white noise at the given per-sample
// SNR (infinite SNR means noise free).
struct SuiteOptions {
  int trials = 1000;
  double snr_db = 6.0;
  double min_cfo_separation_hz = 5.0;
  std::uint64_t seed = 7;
  std::size_t buffer_samples = 8000;
  long first_offset = 1000;
  long last_offset = 4000;
  long offset_tolerance = 2;   // samples, when matching a detection to a packet
  double cfo_tolerance_hz = 3.0;
  unsigned threads = 0;
  ReceiverOptions receiver;
};

struct SuiteReport {
  int trials = 0;
  std::size_t injected = 0;
  std::size_t detected = 0;         // matched packets
  std::size_t false_positives = 0;  // detections matching no injected packet
  std::size_t misses = 0;
  std::size_t bit_errors = 0;       // over matched packets
  std::size_t bits = 0;
  double false_positive_rate() const { return trials ? double(false_positives) / trials : 0.0; }
  double miss_rate() const { return injected ? double(misses) / double(injected) : 0.0; }
};

namespace detail {

struct TrialCounts {
  std::size_t injected = 0, detected = 0, false_positives = 0, misses = 0, bit_errors = 0, bits = 0;
};

inline TrialCounts run_scenario(int packets, const SystemParams& p, const DriftTable& dt, const SuiteOptions& opt,
                                Rng& rng) {
  const int nb = payload_bits(p);
  const double noise = std::isfinite(opt.snr_db) ? 1.0 / db_to_linear(opt.snr_db) : 0.0;
  ComplexSignal s;
  s.fs = p.sample_rate_hz;
  s.samples.assign(opt.buffer_samples, cd{});
  std::uniform_real_distribution<double> cfo_draw(-p.max_cfo_hz, p.max_cfo_hz);
  std::uniform_int_distribution<long> off_draw(opt.first_offset, opt.last_offset);
  std::uniform_int_distribution<int> bit(0, 1);
  std::vector<std::vector<int>> payloads;
  std::vector<long> offsets;
  std::vector<double> cfos;
  for (int k = 0; k < packets; ++k) {
    std::vector<int> bits(static_cast<std::size_t>(nb));
    for (auto& b : bits) b = bit(rng);
    double cfo = cfo_draw(rng);
    for (int guard = 0; guard < 1000; ++guard) {
      bool clear = true;
      for (double c : cfos) clear = clear && std::abs(cfo - c) >= opt.min_cfo_separation_hz;
      if (clear) break;
      cfo = cfo_draw(rng);
    }
    const auto pk = synthesize_packet(bits, p, cfo, rng, true);
    const long off = off_draw(rng);
    for (std::size_t i = 0; i < pk.samples.size() && off + static_cast<long>(i) < static_cast<long>(s.samples.size()); ++i)
      s.samples[static_cast<std::size_t>(off) + i] += pk.samples[i];
    payloads.push_back(std::move(bits));
    offsets.push_back(off);
    cfos.push_back(cfo);
  }
  if (noise > 0.0) add_noise(s.samples, noise, rng);

  ReceiverOptions ro = opt.receiver;
  ro.power_threshold = noise + opt.receiver.power_threshold;
  const auto rx = receive(s, p, dt, ro);

  TrialCounts c;
  c.injected = static_cast<std::size_t>(packets);
  std::vector<char> used(static_cast<std::size_t>(packets), 0);
  for (const auto& r : rx) {
    const long start = std::lround(r.start_s * p.sample_rate_hz);
    int match = -1;
    for (int k = 0; k < packets; ++k) {
      if (used[static_cast<std::size_t>(k)]) continue;
      if (std::abs(start - offsets[static_cast<std::size_t>(k)]) <= opt.offset_tolerance &&
          std::abs(r.cfo_hz - cfos[static_cast<std::size_t>(k)]) <= opt.cfo_tolerance_hz)
        match = k;
    }
    if (match < 0) {
      ++c.false_positives;
      continue;
    }
    used[static_cast<std::size_t>(match)] = 1;
    ++c.detected;
    const auto& truth = payloads[static_cast<std::size_t>(match)];
    for (std::size_t i = 0; i < truth.size(); ++i) c.bit_errors += i >= r.bits.size() || r.bits[i] != truth[i];
    c.bits += truth.size();
  }
  for (char u : used) c.misses += !u;
  return c;
}

}  // namespace detail

// Runs `opt.trials` independent scenarios with `packets` packets each. Trial t
// draws from substream(seed, t), so the report does not depend on threading.
inline SuiteReport run_suite(int packets, const SystemParams& p, const DriftTable& dt, const SuiteOptions& opt = {}) {
  if (packets < 1) throw InvalidArgument("need at least one packet per scenario");
  validate(p, true);
  const long len = static_cast<long>(std::lround(p.packet_duration_s * p.sample_rate_hz));
  if (opt.first_offset < 0 || opt.last_offset < opt.first_offset ||
      opt.last_offset + len > static_cast<long>(opt.buffer_samples))
    throw InvalidArgument("packet offsets must keep every packet inside the buffer");
  std::vector<detail::TrialCounts> per(static_cast<std::size_t>(std::max(opt.trials, 0)));
  parallel_for(
      per.size(),
      [&](std::size_t t) {
        Rng rng = substream(opt.seed, t);
        per[t] = detail::run_scenario(packets, p, dt, opt, rng);
      },
      opt.threads);
  SuiteReport r;
  r.trials = opt.trials;
  for (const auto& c : per) {
    r.injected += c.injected;
    r.detected += c.detected;
    r.false_positives += c.false_positives;
    r.misses += c.misses;
    r.bit_errors += c.bit_errors;
    r.bits += c.bits;
  }
  return r;
}

}  // namespace gfra::sig
