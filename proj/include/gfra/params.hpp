#pragma once

#include <cmath>
#include <sstream>
#include <string>

#include "gfra/error.hpp"

namespace gfra {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

// Radio and protocol constants shared by the analytic model, the rectangle-level
// simulator and the sample-level receiver.
struct SystemParams {
  double bandwidth_hz = 200.0;        // W
  double max_cfo_hz = 100.0;          // Fm, CFO is uniform on [-Fm, Fm]
  double sample_rate_hz = 4000.0;     // Fs
  double symbol_duration_s = 0.010;   // Tb, one 4-PAM symbol
  double packet_duration_s = 0.5;     // Tp, normally derived by packet_duration()
  double packet_bits = 100.0;         // D
  double overhead_bits = 50.0;        // Doh
  double required_snr = db_to_linear(6.0);  // gamma
  double snr_gap = db_to_linear(6.0);       // Gamma
  double sinr_threshold = 0.5 * db_to_linear(6.0);  // St
  double noise_density = db_to_linear(-174.0 - 30.0);  // N0 in W/Hz
  int preamble_length = 23;           // Nzc
  int zc_root = 5;
  int vf_slots = 4;                   // M
  int replicas = 2;                   // N
  double max_frame_s = 2.0;           // Tmax
  double ack_wait_s = 0.5;            // Tack
  // Extra random wait before a retry, uniform on [0, retry_backoff_s]. Zero means
  // the retry starts exactly Tack after the failed frame, so packets that
  // collided once retry in lockstep.
  double retry_backoff_s = 0.0;
  // When set, a device splits one packet's transmit energy evenly across its
  // replicas, so every replica arrives with SNR gamma / N.
  bool split_replica_power = false;

  double replica_area() const { return bandwidth_hz * packet_duration_s; }
  double vf_duration() const { return vf_slots * packet_duration_s; }
  double replica_snr() const {
    return split_replica_power ? required_snr / replicas : required_snr;
  }
  int samples_per_symbol() const {
    return static_cast<int>(std::lround(sample_rate_hz * symbol_duration_s));
  }
  // Offered load per channel, W / (2 Fm + W) * g * Tp.
  double load_from_rate(double replica_rate) const {
    return bandwidth_hz / (2.0 * max_cfo_hz + bandwidth_hz) * replica_rate * packet_duration_s;
  }
  double rate_from_load(double load) const {
    return load * (2.0 * max_cfo_hz + bandwidth_hz) / (bandwidth_hz * packet_duration_s);
  }
};

// Battery, circuit and link-budget constants.
struct EnergyParams {
  double battery_j = 1000.0;          // E0
  double report_period_s = 1800.0;    // Tr
  double static_energy_j = 1e-3;      // Est
  double circuit_power_w = 1e-3;      // Pc
  double pa_inverse_efficiency = 2.5; // alpha
  double cell_radius_m = 1000.0;      // Rc
  double inner_radius_m = 50.0;       // Rin
  // Antenna gain product chosen so that r^sigma / G reproduces
  // 128.1 + 37.6 log10(r / 1000) dB plus the 20 dB loss margin.
  double antenna_gain = db_to_linear(37.6 * 3.0 - 128.1 - 20.0);
  double pathloss_exponent = 3.76;    // sigma
  double pathloss_intercept_db = 128.1;
  double pathloss_margin_db = 20.0;
  double tx_power_min_w = 1e-3;
  double tx_power_max_w = 100e-3;
  double sync_energy_j = 6e-3;        // Esynch
  double sync_delay_s = 2.0;          // Dsynch
  // Granted-access random-access channel.
  double ra_period_s = 2.0;
  int ra_opportunities = 10;
  double ra_preamble_s = 0.23;        // one Nzc-symbol preamble at Tb = 10 ms
  int ra_max_attempts = 50;
  int device_count = 10000;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidParams(what);
}

// Transmission time of one packet, D / (W log2(1 + gamma / Gamma)).
inline double packet_duration(const SystemParams& p) {
  require(p.bandwidth_hz > 0.0, "bandwidth must be positive");
  const double ratio = p.required_snr / p.snr_gap;
  require(ratio > -1.0 && std::isfinite(ratio), "gamma/Gamma must exceed -1");
  const double rate = p.bandwidth_hz * std::log2(1.0 + ratio);
  require(rate > 0.0, "spectral rate W log2(1 + gamma/Gamma) must be positive");
  return p.packet_bits / rate;
}

// Sets the derived packet duration in place and returns it.
inline double update_packet_duration(SystemParams& p) {
  p.packet_duration_s = packet_duration(p);
  return p.packet_duration_s;
}

inline void validate(const SystemParams& p, bool sample_level = false) {
  require(p.bandwidth_hz > 0.0, "W must be positive");
  require(p.max_cfo_hz >= 0.0, "Fm must be non-negative");
  require(p.replicas >= 1 && p.replicas <= p.vf_slots, "need 1 <= N <= M");
  require(p.packet_duration_s > 0.0, "Tp must be positive");
  require(p.packet_bits > p.overhead_bits && p.overhead_bits >= 0.0, "need D > Doh >= 0");
  require(p.sinr_threshold <= p.required_snr, "St must not exceed gamma");
  require(p.required_snr > 0.0 && p.sinr_threshold > 0.0, "SNR thresholds must be positive");
  require(p.ack_wait_s >= 0.0, "Tack must be non-negative");
  require(p.retry_backoff_s >= 0.0, "retry backoff must be non-negative");
  if (sample_level) {
    std::ostringstream os;
    os << "Fs=" << p.sample_rate_hz << " below 2(2Fm+W)=" << 2.0 * (2.0 * p.max_cfo_hz + p.bandwidth_hz);
    require(p.sample_rate_hz >= 2.0 * (2.0 * p.max_cfo_hz + p.bandwidth_hz), os.str());
    require(p.symbol_duration_s > 0.0 && p.samples_per_symbol() >= 1, "need at least one sample per symbol");
    require(p.preamble_length >= 2, "preamble too short");
  }
}

inline void validate(const EnergyParams& e) {
  require(e.battery_j > 0 && e.report_period_s > 0 && e.static_energy_j > 0 && e.circuit_power_w > 0 &&
              e.pa_inverse_efficiency > 0 && e.cell_radius_m > 0 && e.inner_radius_m > 0 &&
              e.antenna_gain > 0 && e.pathloss_exponent > 0 && e.sync_energy_j > 0 && e.sync_delay_s > 0,
          "energy parameters must be positive");
  require(e.inner_radius_m < e.cell_radius_m, "need Rin < Rc");
  require(e.ra_period_s > 0 && e.ra_opportunities >= 1 && e.ra_max_attempts >= 1, "invalid RA configuration");
}

}  // namespace gfra
