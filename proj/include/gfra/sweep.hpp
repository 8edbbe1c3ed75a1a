#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "gfra/kpi.hpp"
#include "gfra/params.hpp"
#include "gfra/policy.hpp"
#include "gfra/random.hpp"
#include "gfra/trial.hpp"

namespace gfra {

// Runs fn(i) for i in [0, n) on a small pool. Results must be written to slot i so
// that the outcome does not depend on scheduling.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, unsigned threads = 0) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// Sample mean with a two-sided Student-t confidence half-width.
struct Estimate {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double half_width = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
};

inline Estimate mean_ci(const std::vector<double>& xs, double level = 0.95) {
  Estimate est;
  std::vector<double> v;
  for (double x : xs)
    if (std::isfinite(x)) v.push_back(x);
  est.n = v.size();
  if (v.empty()) return est;
  double sum = 0.0;
  for (double x : v) sum += x;
  est.mean = sum / double(v.size());
  if (v.size() < 2) {
    est.half_width = std::numeric_limits<double>::infinity();
    return est;
  }
  double ss = 0.0;
  for (double x : v) ss += (x - est.mean) * (x - est.mean);
  const double sd = std::sqrt(ss / double(v.size() - 1));
  boost::math::students_t dist(double(v.size() - 1));
  const double t = boost::math::quantile(boost::math::complement(dist, 0.5 * (1.0 - level)));
  est.half_width = t * sd / std::sqrt(double(v.size()));
  return est;
}

struct KpiEstimate {
  Estimate outage, expected_delay_s, battery_lifetime_s, energy_efficiency, spectral_efficiency,
      spectral_efficiency_success, throughput, avg_tx_power_w;
};

inline KpiEstimate aggregate(const std::vector<KpiReport>& reps) {
  auto col = [&](double KpiReport::*field) {
    std::vector<double> v;
    v.reserve(reps.size());
    for (const auto& r : reps) v.push_back(r.*field);
    return mean_ci(v);
  };
  KpiEstimate k;
  k.outage = col(&KpiReport::outage);
  k.expected_delay_s = col(&KpiReport::expected_delay_s);
  k.battery_lifetime_s = col(&KpiReport::battery_lifetime_s);
  k.energy_efficiency = col(&KpiReport::energy_efficiency);
  k.spectral_efficiency = col(&KpiReport::spectral_efficiency);
  k.spectral_efficiency_success = col(&KpiReport::spectral_efficiency_success);
  k.throughput = col(&KpiReport::throughput);
  k.avg_tx_power_w = col(&KpiReport::avg_tx_power_w);
  return k;
}

// Slots per virtual frame used with N replicas: M = 2N, and M = 1 for N = 1.
inline int default_vf_slots(int replicas) { return replicas == 1 ? 1 : 2 * replicas; }

// New-packet rate whose first transmissions alone put `load` on the channel.
inline double lambda_for_load(double load, const SystemParams& p) { return p.rate_from_load(load) / p.replicas; }

struct SweepOptions {
  // Each master seed contributes `reps` trials per cell.
  std::vector<std::uint64_t> seeds{1};
  double packets_per_trial = 2e4;
  TrialConfig trial;
  std::vector<double> coding_rates{1.0};  // only used by the sc policy
  unsigned threads = 0;
};

struct SweepRow {
  double load = 0.0;
  CombiningPolicy policy = CombiningPolicy::MaxRatio;
  int replicas = 1;
  int vf_slots = 1;
  double coding_rate = 1.0;
  double lambda = 0.0;
  double measured_load = 0.0;
  std::size_t packets = 0;
  std::size_t delivered = 0;
  KpiEstimate empirical;
};

// Horizon that yields about `packets` arrivals inside the statistics window.
inline double horizon_for(double lambda, double packets, const SystemParams& p, const TrialConfig& cfg) {
  return detail::warmup_span(p, cfg) + detail::tail_span(p, cfg) + (lambda > 0.0 ? packets / lambda : p.vf_duration());
}

// One row per (load, N, policy, Cr) with `reps` independent trials per seed.
// Trial streams derive from (seed, cell, rep) so the table is reproducible bit
// for bit.
inline std::vector<SweepRow> sweep(const std::vector<double>& loads, int reps, const SystemParams& base,
                                   const EnergyParams& e, const std::vector<CombiningPolicy>& policies,
                                   const std::vector<int>& replica_counts, const SweepOptions& opt = {}) {
  if (reps < 1) throw InvalidArgument("need at least one repetition");
  if (opt.seeds.empty()) throw InvalidArgument("need at least one seed");
  const std::size_t per_cell = opt.seeds.size() * static_cast<std::size_t>(reps);
  std::vector<SweepRow> rows;
  for (double load : loads) {
    for (int n : replica_counts) {
      for (CombiningPolicy pol : policies) {
        const std::vector<double> rates =
            pol == CombiningPolicy::Selection ? opt.coding_rates : std::vector<double>{1.0};
        for (double cr : rates) {
          SweepRow row;
          row.load = load;
          row.policy = pol;
          row.replicas = n;
          row.vf_slots = default_vf_slots(n);
          row.coding_rate = cr;
          rows.push_back(row);
        }
      }
    }
  }
  std::vector<TrialResult> results(rows.size() * per_cell);
  parallel_for(
      results.size(),
      [&](std::size_t k) {
        const std::size_t cell = k / per_cell;
        const std::uint64_t seed = opt.seeds[(k % per_cell) / static_cast<std::size_t>(reps)];
        const std::size_t rep = k % static_cast<std::size_t>(reps);
        const SweepRow& row = rows[cell];
        SystemParams p = base;
        p.replicas = row.replicas;
        p.vf_slots = row.vf_slots;
        TrialConfig cfg = opt.trial;
        cfg.rule.policy = row.policy;
        cfg.rule.coding_rate = row.coding_rate;
        const double lambda = lambda_for_load(row.load, p);
        Rng rng = substream(seed, (static_cast<std::uint64_t>(cell) << 24) | rep);
        results[k] = run_trial(rng, lambda, horizon_for(lambda, opt.packets_per_trial, p, cfg), p, e, cfg);
      },
      opt.threads);
  for (std::size_t cell = 0; cell < rows.size(); ++cell) {
    SweepRow& row = rows[cell];
    SystemParams p = base;
    p.replicas = row.replicas;
    p.vf_slots = row.vf_slots;
    row.lambda = lambda_for_load(row.load, p);
    std::vector<KpiReport> kpis;
    double load_sum = 0.0;
    for (std::size_t r = 0; r < per_cell; ++r) {
      const TrialResult& t = results[cell * per_cell + r];
      if (!t.applicable) continue;
      kpis.push_back(t.kpi);
      row.packets += t.packets;
      row.delivered += t.delivered;
      load_sum += t.offered_load;
    }
    row.empirical = aggregate(kpis);
    row.measured_load = kpis.empty() ? 0.0 : load_sum / double(kpis.size());
  }
  return rows;
}

}  // namespace gfra
