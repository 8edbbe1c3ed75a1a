#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gfra/error.hpp"
#include "gfra/interference.hpp"
#include "gfra/log.hpp"
#include "gfra/params.hpp"

namespace gfra {

// Key performance indicators at one operating point.
struct KpiReport {
  double outage = 0.0;                // per-attempt failure probability
  double expected_delay_s = 0.0;
  double battery_lifetime_s = 0.0;
  double energy_efficiency = 0.0;     // bits / J
  double spectral_efficiency = 0.0;   // bits / s / Hz
  double spectral_efficiency_success = 0.0;
  double throughput = 0.0;            // delivered packets / s
  double avg_tx_power_w = 0.0;
};

// Arrival to successful reception with retransmission after Tack:
// sum_i (M Tp + Tack) Po^(i-1) (1 - Po) - Tack = (M Tp + Tack) / (1 - Po) - Tack.
// A retry backoff adds its mean to every retransmission cycle.
inline double expected_delay(double po, const SystemParams& p) {
  if (po < 0.0 || po > 1.0) throw DomainError("outage probability outside [0, 1]");
  if (po >= 1.0) return std::numeric_limits<double>::infinity();
  const double cycle_extra = p.ack_wait_s + 0.5 * p.retry_backoff_s;
  return (p.vf_duration() + cycle_extra) / (1.0 - po) - cycle_extra;
}

// Channel-inversion transmit power at distance r: gamma N0 W Gamma r^sigma / G.
inline double tx_power_at(double distance_m, const SystemParams& p, const EnergyParams& e) {
  return p.required_snr * p.noise_density * p.bandwidth_hz * p.snr_gap *
         std::pow(distance_m, e.pathloss_exponent) / e.antenna_gain;
}

// Same requirement from the dB pathloss law 128.1 + 37.6 log10(d / 1000) plus the
// loss margin; no coding-gap factor.
inline double tx_power_db_mode(double distance_m, const SystemParams& p, const EnergyParams& e) {
  const double loss_db = e.pathloss_intercept_db + 10.0 * e.pathloss_exponent * std::log10(distance_m / 1000.0) +
                         e.pathloss_margin_db;
  return p.required_snr * p.noise_density * p.bandwidth_hz * db_to_linear(loss_db);
}

// Clamps into [Pt_min, Pt_max]; warns when the device cannot reach the BS.
inline double clamp_tx_power(double pt, const EnergyParams& e) {
  if (pt > e.tx_power_max_w) {
    std::ostringstream os;
    os << "required transmit power " << pt << " W exceeds Pt_max " << e.tx_power_max_w << " W (coverage limit)";
    warn(os.str());
  }
  return std::clamp(pt, e.tx_power_min_w, e.tx_power_max_w);
}

// Cell-average transmit power for devices uniform on the disc of radius Rc:
// 2 Rc^sigma gamma N0 W Gamma / (G (sigma + 2)).
inline double avg_transmit_power(const EnergyParams& e, const SystemParams& p) {
  if (!(e.pathloss_exponent > 0.0)) throw DomainError("pathloss exponent must be positive");
  return 2.0 * std::pow(e.cell_radius_m, e.pathloss_exponent) * p.required_snr * p.noise_density * p.bandwidth_hz *
         p.snr_gap / (e.antenna_gain * (e.pathloss_exponent + 2.0));
}

// Power radiated per replica when a device spends `avg_pt` on one packet.
inline double replica_tx_power(double avg_pt, const SystemParams& p) {
  return p.split_replica_power ? avg_pt / p.replicas : avg_pt;
}

// Device energy of one virtual frame plus the ACK wait:
// (Pc + alpha Pt) N Tp + Pc (M - N) Tp + Pc Tack.
inline double attempt_energy(const EnergyParams& e, const SystemParams& p, double avg_pt) {
  const double pt = replica_tx_power(avg_pt, p);
  const double tp = p.packet_duration_s;
  return (e.circuit_power_w + e.pa_inverse_efficiency * pt) * p.replicas * tp +
         e.circuit_power_w * (p.vf_slots - p.replicas) * tp + e.circuit_power_w * p.ack_wait_s;
}

enum class LifetimeMode {
  Corrected,     // expected attempts 1 / (1 - Po)
  PaperLiteral,  // printed 1 / Po factor
};

inline double battery_lifetime(double po, const EnergyParams& e, const SystemParams& p, double avg_pt,
                               LifetimeMode mode = LifetimeMode::Corrected) {
  if (po < 0.0 || po > 1.0) throw DomainError("outage probability outside [0, 1]");
  const double per_attempt = attempt_energy(e, p, avg_pt);
  double factor;
  if (mode == LifetimeMode::PaperLiteral) {
    if (po <= 0.0) throw DomainError("paper-literal lifetime divides by Po = 0");
    factor = 1.0 / po;
  } else {
    if (po >= 1.0) return 0.0;
    factor = 1.0 / (1.0 - po);
  }
  return e.battery_j * e.report_period_s / (e.static_energy_j + factor * per_attempt);
}

// Useful bits per joule of one attempt: (1 - Po)(D - Doh) / attempt energy.
inline double energy_efficiency(double po, const EnergyParams& e, const SystemParams& p, double avg_pt) {
  if (po < 0.0 || po > 1.0) throw DomainError("outage probability outside [0, 1]");
  return (1.0 - po) * (p.packet_bits - p.overhead_bits) / attempt_energy(e, p, avg_pt);
}

// lambda (D - Doh) / (2 (Fm + W/2)).
inline double spectral_efficiency(double lambda, const SystemParams& p) {
  if (lambda < 0.0) throw DomainError("negative arrival rate");
  return lambda * (p.packet_bits - p.overhead_bits) / (2.0 * (p.max_cfo_hz + p.bandwidth_hz / 2.0));
}

inline double spectral_efficiency_success(double lambda, double po, const SystemParams& p) {
  return (1.0 - po) * spectral_efficiency(lambda, p);
}

inline KpiReport grant_free_kpis(const LoadPoint& lp, const EnergyParams& e, const SystemParams& p, double avg_pt,
                                 int max_retries, LifetimeMode mode = LifetimeMode::Corrected) {
  KpiReport r;
  const double po = std::clamp(lp.outage, 0.0, 1.0);
  r.outage = po;
  r.expected_delay_s = expected_delay(po, p);
  r.battery_lifetime_s = (mode == LifetimeMode::PaperLiteral && po <= 0.0)
                             ? std::numeric_limits<double>::quiet_NaN()
                             : battery_lifetime(po, e, p, avg_pt, mode);
  r.energy_efficiency = energy_efficiency(po, e, p, avg_pt);
  r.spectral_efficiency = spectral_efficiency(lp.lambda, p);
  r.spectral_efficiency_success = spectral_efficiency_success(lp.lambda, po, p);
  r.throughput = lp.lambda * (1.0 - std::pow(po, max_retries + 1));
  r.avg_tx_power_w = avg_pt;
  return r;
}

// ---------------------------------------------------------------------------
// Granted-access baseline: contention on a slotted RA channel, then one
// collision-free data transmission after synchronisation.

struct RaEquilibrium {
  double contenders = 0.0;    // mean devices per RA period
  double success_prob = 1.0;  // per attempt
  double mean_attempts = 1.0;
  double drop_prob = 0.0;
  bool overload = false;      // operating beyond the RA throughput peak
};

// Expected singleton opportunities when n devices pick uniformly among R.
inline double ra_expected_successes(double n, int opportunities) {
  if (n <= 0.0) return 0.0;
  if (opportunities == 1) return n <= 1.0 ? n : 0.0;
  return n * std::pow(1.0 - 1.0 / opportunities, n - 1.0);
}

// Stationary contention level with retries capped at A attempts: the contender
// count n solves n = a E[attempts](ps(n)). The other contenders of a tagged
// device are Poisson with mean n, so ps(n) = exp(-n / R). Close to the RA
// capacity the simulated system can also sit in a collapsed high-contention
// state; this is the low-contention root.
inline RaEquilibrium ra_equilibrium(double lambda, const EnergyParams& e) {
  RaEquilibrium eq;
  const double a = lambda * e.ra_period_s;
  const int cap = e.ra_max_attempts;
  const double r = static_cast<double>(e.ra_opportunities);
  auto ps_of = [&](double n) { return std::exp(-n / r); };
  auto attempts_of = [&](double ps) {
    if (ps <= 0.0) return static_cast<double>(cap);
    return (1.0 - std::pow(1.0 - ps, cap)) / ps;
  };
  if (a <= 0.0) return eq;
  auto h = [&](double n) { return a * attempts_of(ps_of(n)) - n; };
  // Smallest root: scan upward from n = a, then bisect.
  double lo = a, hi = a;
  const double step = std::max(a * 1e-3, 1e-6);
  const double limit = a * cap + 1.0;
  while (hi < limit && h(hi) > 0.0) {
    lo = hi;
    hi = std::min(limit, hi + step * std::max(1.0, hi / a));
  }
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (h(mid) > 0.0 ? lo : hi) = mid;
  }
  eq.contenders = 0.5 * (lo + hi);
  eq.success_prob = ps_of(eq.contenders);
  eq.mean_attempts = attempts_of(eq.success_prob);
  eq.drop_prob = std::pow(1.0 - eq.success_prob, cap);
  eq.overload = eq.contenders > r;  // n exp(-n / R) peaks at n = R
  return eq;
}

inline double granted_ra_energy(const EnergyParams& e, double avg_pt) {
  return (e.circuit_power_w + e.pa_inverse_efficiency * avg_pt) * e.ra_preamble_s;
}

// Energy after a successful RA: synchronisation, idle listening during Dsynch,
// one data packet and the ACK wait.
inline double granted_delivery_energy(const EnergyParams& e, const SystemParams& p, double avg_pt) {
  return e.sync_energy_j + e.circuit_power_w * e.sync_delay_s +
         (e.circuit_power_w + e.pa_inverse_efficiency * avg_pt) * p.packet_duration_s +
         e.circuit_power_w * p.ack_wait_s;
}

inline KpiReport granted_kpis(double lambda, const EnergyParams& e, const SystemParams& p, double avg_pt,
                              RaEquilibrium* out_eq = nullptr) {
  const RaEquilibrium eq = ra_equilibrium(lambda, e);
  if (out_eq) *out_eq = eq;
  KpiReport r;
  const double success = 1.0 - eq.drop_prob;
  // Mean attempts of the reports that do get through.
  double k_success = 1.0;
  if (eq.success_prob > 0.0 && success > 0.0) {
    double acc = 0.0, pk = eq.success_prob;
    for (int k = 1; k <= e.ra_max_attempts; ++k) {
      acc += k * pk;
      pk *= 1.0 - eq.success_prob;
    }
    k_success = acc / success;
  }
  const double energy = eq.mean_attempts * granted_ra_energy(e, avg_pt) + success * granted_delivery_energy(e, p, avg_pt);
  r.outage = eq.drop_prob;
  r.expected_delay_s = success > 0.0 ? 0.5 * e.ra_period_s + (k_success - 1.0) * e.ra_period_s + e.sync_delay_s +
                                           p.packet_duration_s
                                     : std::numeric_limits<double>::infinity();
  r.battery_lifetime_s = e.battery_j * e.report_period_s / (e.static_energy_j + energy);
  r.energy_efficiency = energy > 0.0 ? success * (p.packet_bits - p.overhead_bits) / energy : 0.0;
  r.spectral_efficiency = spectral_efficiency(lambda, p);
  r.spectral_efficiency_success = success * r.spectral_efficiency;
  r.throughput = lambda * success;
  r.avg_tx_power_w = avg_pt;
  return r;
}

}  // namespace gfra
