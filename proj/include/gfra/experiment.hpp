#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfra/config.hpp"
#include "gfra/interference.hpp"
#include "gfra/kpi.hpp"
#include "gfra/sigchain/suite.hpp"
#include "gfra/sweep.hpp"
#include "gfra/trial.hpp"

namespace gfra {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class Kpi { EnergyEfficiency, Lifetime, Delay, SpectralEfficiency };

inline const std::vector<std::pair<Kpi, std::string>>& kpi_figures() {
  static const std::vector<std::pair<Kpi, std::string>> f{
      {Kpi::EnergyEfficiency, "ee"}, {Kpi::Lifetime, "lifetime"}, {Kpi::Delay, "delay"}, {Kpi::SpectralEfficiency, "se"}};
  return f;
}

inline bool higher_is_better(Kpi k) { return k != Kpi::Delay; }

inline double kpi_value(const KpiReport& r, Kpi k) {
  switch (k) {
    case Kpi::EnergyEfficiency: return r.energy_efficiency;
    case Kpi::Lifetime: return r.battery_lifetime_s;
    case Kpi::Delay: return r.expected_delay_s;
    case Kpi::SpectralEfficiency: return r.spectral_efficiency_success;
  }
  return kNaN;
}

inline Estimate kpi_estimate(const KpiEstimate& r, Kpi k) {
  switch (k) {
    case Kpi::EnergyEfficiency: return r.energy_efficiency;
    case Kpi::Lifetime: return r.battery_lifetime_s;
    case Kpi::Delay: return r.expected_delay_s;
    case Kpi::SpectralEfficiency: return r.spectral_efficiency_success;
  }
  return {};
}

// One operating point of grant-free access (scheme "grant-free") or of the
// granted baseline carrying the same report traffic (scheme "granted").
struct KpiRow {
  std::string scheme;
  CombiningPolicy policy = CombiningPolicy::MaxRatio;
  int replicas = 1;
  int vf_slots = 1;
  double load = 0.0;
  double lambda = 0.0;
  KpiReport analytic;
  KpiEstimate empirical;
  double measured_load = kNaN;
  bool converged = true;
  bool overload = false;
  bool diverged = false;
};

struct ReliabilityRow {
  double load = 0.0;
  int replicas = 1;
  int vf_slots = 1;
  double coding_rate = 1.0;
  double lambda = 0.0;
  double analytic_success = kNaN;
  Estimate empirical_success;
  double delivery_ratio = kNaN;
  double measured_load = kNaN;
  std::size_t packets = 0;
};

struct ExperimentResult {
  std::vector<KpiRow> kpi_rows;
  std::vector<ReliabilityRow> reliability_rows;
  nlohmann::json summary;
};

namespace detail {

inline SystemParams with_replicas(SystemParams p, int n) {
  p.replicas = n;
  p.vf_slots = default_vf_slots(n);
  return p;
}

inline TrialConfig trial_config(const ExperimentConfig& c) {
  TrialConfig t;
  t.max_retries = c.max_retries;
  t.per_device_power = c.per_device_power;
  t.clamp_power = c.clamp_power;
  return t;
}

inline std::string label(int n, CombiningPolicy pol) { return "N=" + std::to_string(n) + "/" + to_string(pol); }

// The CDF of a single interferer depends on N only through the grid, so one law
// per replica count serves every load and policy.
class AnalyticCache {
 public:
  explicit AnalyticCache(const ExperimentConfig& c) : c_(c) {}

  LoadPoint solve(const SystemParams& p, CombiningPolicy pol, double lambda) {
    auto key = std::make_pair(p.replicas, p.split_replica_power);
    auto it = laws_.find(key);
    if (it == laws_.end())
      it = laws_.emplace(key, make_base_law(p, c_.base_law, c_.seeds.front(), c_.oracle_samples)).first;
    AnalyticOutage outage(p, it->second, pol, c_.mixture, c_.mrc_model);
    return solve_offered_load(lambda, p, outage);
  }

 private:
  const ExperimentConfig& c_;
  std::map<std::pair<int, bool>, InterferenceCdf> laws_;
};

inline std::vector<KpiEstimate> granted_empirical(const ExperimentConfig& c, const SystemParams& base,
                                                  const std::vector<std::pair<int, double>>& cells) {
  const std::size_t per_cell = c.seeds.size() * static_cast<std::size_t>(c.reps);
  std::vector<GrantedResult> res(cells.size() * per_cell);
  const TrialConfig cfg = trial_config(c);
  parallel_for(
      res.size(),
      [&](std::size_t k) {
        const std::size_t cell = k / per_cell;
        const std::uint64_t seed = c.seeds[(k % per_cell) / static_cast<std::size_t>(c.reps)];
        const std::size_t rep = k % static_cast<std::size_t>(c.reps);
        const SystemParams p = with_replicas(base, cells[cell].first);
        const double lambda = cells[cell].second;
        const double span = 4.0 * c.energy.ra_period_s + (lambda > 0.0 ? c.packets_per_trial / lambda : 1.0);
        Rng rng = substream(seed, (std::uint64_t{1} << 40) | (static_cast<std::uint64_t>(cell) << 24) | rep);
        res[k] = run_granted_baseline(rng, lambda, span, p, c.energy, cfg);
      },
      c.threads);
  std::vector<KpiEstimate> out;
  for (std::size_t cell = 0; cell < cells.size(); ++cell) {
    std::vector<KpiReport> reps;
    for (std::size_t r = 0; r < per_cell; ++r)
      if (res[cell * per_cell + r].applicable) reps.push_back(res[cell * per_cell + r].kpi);
    out.push_back(aggregate(reps));
  }
  return out;
}

inline nlohmann::json nullable(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

struct Comparison {
  std::vector<double> grant_free_better, granted_better;
  double crossover = kNaN;  // first load where granted wins after a grant-free win
};

inline Comparison compare(const std::vector<double>& loads, const std::vector<double>& gf, const std::vector<double>& gr,
                          bool higher_better) {
  Comparison cmp;
  bool seen_gf = false;
  for (std::size_t i = 0; i < loads.size(); ++i) {
    // NaN means not measured; an infinite delay still ranks.
    if (std::isnan(gf[i]) || std::isnan(gr[i])) continue;
    const bool gf_wins = higher_better ? gf[i] > gr[i] : gf[i] < gr[i];
    const bool gr_wins = higher_better ? gr[i] > gf[i] : gr[i] < gf[i];
    if (gf_wins) {
      cmp.grant_free_better.push_back(loads[i]);
      seen_gf = true;
    }
    if (gr_wins) {
      cmp.granted_better.push_back(loads[i]);
      if (seen_gf && std::isnan(cmp.crossover)) cmp.crossover = loads[i];
    }
  }
  return cmp;
}

inline nlohmann::json to_json(const Comparison& c) {
  return {{"grant_free_better_at", c.grant_free_better},
          {"granted_better_at", c.granted_better},
          {"crossover_load", nullable(c.crossover)}};
}

}  // namespace detail

// KPI sweep against the granted baseline, plus the reliability sweep, as
// selected by cfg.figures. Nothing is written here.
inline ExperimentResult compute_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  ExperimentResult out;
  auto wants = [&](const std::string& f) { return std::find(cfg.figures.begin(), cfg.figures.end(), f) != cfg.figures.end(); };
  const bool kpis = wants("ee") || wants("lifetime") || wants("delay") || wants("se");
  detail::AnalyticCache cache(cfg);
  std::size_t divergent = 0, unconverged = 0;

  SweepOptions so;
  so.seeds = cfg.seeds;
  so.packets_per_trial = cfg.packets_per_trial;
  so.trial = detail::trial_config(cfg);
  so.threads = cfg.threads;

  if (kpis) {
    SystemParams base = cfg.system;
    base.split_replica_power = cfg.kpi_split_power;
    const auto rows = sweep(cfg.loads, cfg.reps, base, cfg.energy, cfg.policies, cfg.replica_counts, so);
    for (const auto& r : rows) {
      const SystemParams p = detail::with_replicas(base, r.replicas);
      const double pt = avg_transmit_power(cfg.energy, p);
      KpiRow row;
      row.scheme = "grant-free";
      row.policy = r.policy;
      row.replicas = r.replicas;
      row.vf_slots = r.vf_slots;
      row.load = r.load;
      row.lambda = r.lambda;
      row.empirical = r.empirical;
      row.measured_load = r.measured_load;
      if (r.policy == CombiningPolicy::Selection) {
        // No closed form for fragment combining.
        row.analytic = {kNaN, kNaN, kNaN, kNaN, spectral_efficiency(r.lambda, p), kNaN, kNaN, pt};
      } else {
        const LoadPoint lp = cache.solve(p, r.policy, r.lambda);
        row.converged = lp.converged;
        row.overload = lp.overload;
        row.analytic = grant_free_kpis(lp, cfg.energy, p, pt, cfg.max_retries, cfg.lifetime_mode);
        const double diff = std::abs(row.analytic.outage - r.empirical.outage.mean);
        row.diverged = std::isfinite(diff) && diff > cfg.divergence_tolerance;
      }
      divergent += row.diverged;
      unconverged += !row.converged;
      out.kpi_rows.push_back(row);
    }
    // Granted rows carry the report traffic of each replica count.
    std::vector<std::pair<int, double>> cells;
    for (double x : cfg.loads)
      for (int n : cfg.replica_counts) cells.emplace_back(n, lambda_for_load(x, detail::with_replicas(base, n)));
    const auto emp = detail::granted_empirical(cfg, base, cells);
    std::size_t i = 0;
    for (double x : cfg.loads) {
      for (int n : cfg.replica_counts) {
        const SystemParams p = detail::with_replicas(base, n);
        const double pt = avg_transmit_power(cfg.energy, p);
        KpiRow row;
        row.scheme = "granted";
        row.replicas = n;
        row.vf_slots = p.vf_slots;
        row.load = x;
        row.lambda = cells[i].second;
        RaEquilibrium eq;
        row.analytic = granted_kpis(row.lambda, cfg.energy, p, pt, &eq);
        row.overload = eq.overload;
        row.empirical = emp[i];
        out.kpi_rows.push_back(row);
        ++i;
      }
    }
  }

  if (wants("reliability")) {
    SystemParams base = cfg.system;
    base.split_replica_power = cfg.reliability_split_power;
    so.coding_rates = cfg.coding_rates;
    const auto rows =
        sweep(cfg.loads, cfg.reps, base, cfg.energy, {CombiningPolicy::Selection}, cfg.replica_counts, so);
    for (const auto& r : rows) {
      ReliabilityRow row;
      row.load = r.load;
      row.replicas = r.replicas;
      row.vf_slots = r.vf_slots;
      row.coding_rate = r.coding_rate;
      row.lambda = r.lambda;
      row.packets = r.packets;
      row.measured_load = r.measured_load;
      row.empirical_success = r.empirical.outage;
      row.empirical_success.mean = 1.0 - r.empirical.outage.mean;
      row.delivery_ratio = r.packets ? double(r.delivered) / double(r.packets) : kNaN;
      // With Cr = 1 a replica decodes only when it is clean on its own, which
      // is the independent-replica model.
      if (r.coding_rate == 1.0) {
        const LoadPoint lp = cache.solve(detail::with_replicas(base, r.replicas), CombiningPolicy::None, r.lambda);
        row.analytic_success = 1.0 - lp.outage;
      }
      out.reliability_rows.push_back(row);
    }
  }

  // Summary: where granted access overtakes grant-free access, per KPI.
  nlohmann::json crossings = nlohmann::json::object();
  nlohmann::json tack = nlohmann::json::array();
  if (kpis) {
    for (const auto& [k, name] : kpi_figures()) {
      nlohmann::json per = nlohmann::json::object();
      for (int n : cfg.replica_counts) {
        std::vector<double> gr_a, gr_e;
        for (const auto& r : out.kpi_rows)
          if (r.scheme == "granted" && r.replicas == n) {
            gr_a.push_back(kpi_value(r.analytic, k));
            gr_e.push_back(kpi_estimate(r.empirical, k).mean);
          }
        for (CombiningPolicy pol : cfg.policies) {
          std::vector<double> gf_a, gf_e;
          for (const auto& r : out.kpi_rows)
            if (r.scheme == "grant-free" && r.replicas == n && r.policy == pol) {
              gf_a.push_back(kpi_value(r.analytic, k));
              gf_e.push_back(kpi_estimate(r.empirical, k).mean);
            }
          per[detail::label(n, pol)] = {
              {"analytic", detail::to_json(detail::compare(cfg.loads, gf_a, gr_a, higher_is_better(k)))},
              {"empirical", detail::to_json(detail::compare(cfg.loads, gf_e, gr_e, higher_is_better(k)))}};
        }
      }
      crossings[name] = per;
    }
    // Tack only enters the energy and delay terms, not the outage.
    for (double t : cfg.tack_values) {
      nlohmann::json entry = {{"ack_wait_s", t}};
      for (const auto& [k, name] : kpi_figures()) {
        if (k == Kpi::SpectralEfficiency) continue;
        nlohmann::json per = nlohmann::json::object();
        for (int n : cfg.replica_counts) {
          for (CombiningPolicy pol : cfg.policies) {
            if (pol == CombiningPolicy::Selection) continue;
            std::vector<double> gf, gr;
            for (double x : cfg.loads) {
              SystemParams p = detail::with_replicas(cfg.system, n);
              p.split_replica_power = cfg.kpi_split_power;
              p.ack_wait_s = t;
              const double pt = avg_transmit_power(cfg.energy, p);
              const double lambda = lambda_for_load(x, p);
              gf.push_back(kpi_value(
                  grant_free_kpis(cache.solve(p, pol, lambda), cfg.energy, p, pt, cfg.max_retries, cfg.lifetime_mode), k));
              gr.push_back(kpi_value(granted_kpis(lambda, cfg.energy, p, pt), k));
            }
            per[detail::label(n, pol)] = detail::nullable(detail::compare(cfg.loads, gf, gr, higher_is_better(k)).crossover);
          }
        }
        entry[name + "_crossover_load"] = per;
      }
      tack.push_back(entry);
    }
  }
  out.summary = {{"crossovers", crossings},
                 {"ack_wait_sensitivity", tack},
                 {"divergent_rows", divergent},
                 {"unconverged_rows", unconverged},
                 {"config", to_json(cfg)}};
  return out;
}

namespace detail {

inline void put(std::ostream& os, double x) {
  if (std::isnan(x))
    os << "nan";
  else if (std::isinf(x))
    os << (x > 0 ? "inf" : "-inf");
  else
    os << x;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  os << std::setprecision(10);
  return os;
}

}  // namespace detail

inline void write_kpi_csv(std::ostream& os, const std::vector<KpiRow>& rows, Kpi k) {
  os << "scheme,policy,replicas,vf_slots,load,lambda,analytic,empirical,empirical_ci95,analytic_outage,"
        "empirical_outage,empirical_outage_ci95,measured_load,converged,overload,diverged\n";
  for (const auto& r : rows) {
    const Estimate e = kpi_estimate(r.empirical, k);
    os << r.scheme << ',' << (r.scheme == "granted" ? "-" : to_string(r.policy)) << ',' << r.replicas << ','
       << r.vf_slots << ',';
    for (double x : {r.load, r.lambda, kpi_value(r.analytic, k), e.mean, e.half_width, r.analytic.outage,
                     r.empirical.outage.mean, r.empirical.outage.half_width, r.measured_load}) {
      detail::put(os, x);
      os << ',';
    }
    os << r.converged << ',' << r.overload << ',' << r.diverged << '\n';
  }
}

inline void write_reliability_csv(std::ostream& os, const std::vector<ReliabilityRow>& rows) {
  os << "replicas,vf_slots,coding_rate,load,lambda,analytic_success,empirical_success,empirical_success_ci95,"
        "delivery_ratio,measured_load,packets\n";
  for (const auto& r : rows) {
    os << r.replicas << ',' << r.vf_slots << ',';
    for (double x : {r.coding_rate, r.load, r.lambda, r.analytic_success, r.empirical_success.mean,
                     r.empirical_success.half_width, r.delivery_ratio, r.measured_load}) {
      detail::put(os, x);
      os << ',';
    }
    os << r.packets << '\n';
  }
}

// Runs the experiment and writes fig-<name>.csv for each selected figure plus
// summary.json into cfg.output_dir.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + cfg.output_dir + "'");
  // Fail before the sweep rather than after it.
  {
    auto probe = detail::open_out(dir / "summary.json");
  }
  ExperimentResult res = compute_experiment(cfg);
  for (const auto& [k, name] : kpi_figures()) {
    if (std::find(cfg.figures.begin(), cfg.figures.end(), name) == cfg.figures.end()) continue;
    auto os = detail::open_out(dir / ("fig-" + name + ".csv"));
    write_kpi_csv(os, res.kpi_rows, k);
  }
  if (std::find(cfg.figures.begin(), cfg.figures.end(), "reliability") != cfg.figures.end()) {
    auto os = detail::open_out(dir / "fig-reliability.csv");
    write_reliability_csv(os, res.reliability_rows);
  }
  auto os = detail::open_out(dir / "summary.json");
  os << res.summary.dump(2) << '\n';
  return res;
}

// ---------------------------------------------------------------------------
// Receiver calibration

struct ReceiverReport {
  sig::SuiteReport single;       // one packet per scenario
  sig::SuiteReport single_clean; // one packet, noise free
  sig::SuiteReport two_packet;
  double drift_at_zero = kNaN;   // Q(0), samples
  long max_abs_drift = 0;        // samples
  long drift_bound = 0;          // floor(Nzc / 2) symbols, in samples
  bool drift_deterministic = false;
  double max_false_positive_rate = 0.01;
  double max_miss_rate = 0.05;

  bool single_ok() const { return single.bit_errors == 0 && single.misses == 0 && single_clean.bit_errors == 0 && single_clean.misses == 0; }
  bool two_packet_ok() const {
    return two_packet.false_positive_rate() < max_false_positive_rate && two_packet.miss_rate() < max_miss_rate;
  }
  bool drift_ok() const { return drift_at_zero == 0.0 && max_abs_drift <= drift_bound && drift_deterministic; }
  bool pass() const { return single_ok() && two_packet_ok() && drift_ok(); }
};

inline ReceiverReport validate_receiver(const SystemParams& p, const ReceiverSuiteOptions& o) {
  validate(p, true);
  ReceiverReport rep;
  const auto dt = sig::default_drift_table(p);
  const auto again = sig::default_drift_table(p);
  rep.drift_deterministic = dt.shift == again.shift && dt.gain == again.gain;
  rep.drift_at_zero = static_cast<double>(dt.q(0.0));
  for (long q : dt.shift) rep.max_abs_drift = std::max(rep.max_abs_drift, std::abs(q));
  rep.drift_bound = static_cast<long>(p.preamble_length / 2) * p.samples_per_symbol();

  sig::SuiteOptions so;
  so.seed = o.seed;
  so.snr_db = o.snr_db;
  so.min_cfo_separation_hz = o.min_cfo_separation_hz;
  so.threads = o.threads;
  so.trials = o.single_trials;
  rep.single = sig::run_suite(1, p, dt, so);
  so.snr_db = std::numeric_limits<double>::infinity();
  rep.single_clean = sig::run_suite(1, p, dt, so);
  so.snr_db = o.snr_db;
  so.trials = o.two_packet_trials;
  so.seed = o.seed + 1;
  rep.two_packet = sig::run_suite(2, p, dt, so);
  return rep;
}

inline nlohmann::json to_json(const sig::SuiteReport& r) {
  return {{"trials", r.trials},
          {"injected", r.injected},
          {"detected", r.detected},
          {"false_positives", r.false_positives},
          {"misses", r.misses},
          {"bit_errors", r.bit_errors},
          {"bits", r.bits},
          {"false_positive_rate", r.false_positive_rate()},
          {"miss_rate", r.miss_rate()}};
}

inline nlohmann::json to_json(const ReceiverReport& r) {
  return {{"single_packet", to_json(r.single)},
          {"single_packet_noise_free", to_json(r.single_clean)},
          {"two_packet", to_json(r.two_packet)},
          {"drift_q0_samples", r.drift_at_zero},
          {"drift_max_abs_samples", r.max_abs_drift},
          {"drift_bound_samples", r.drift_bound},
          {"drift_deterministic", r.drift_deterministic},
          {"single_packet_pass", r.single_ok()},
          {"two_packet_pass", r.two_packet_ok()},
          {"drift_pass", r.drift_ok()},
          {"pass", r.pass()}};
}

}  // namespace gfra
