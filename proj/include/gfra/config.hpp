#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfra/error.hpp"
#include "gfra/interference.hpp"
#include "gfra/kpi.hpp"
#include "gfra/params.hpp"
#include "gfra/policy.hpp"

namespace gfra {

// Antenna gain that turns r^sigma / G into intercept + 10 sigma log10(r / 1000)
// dB plus the loss margin.
inline double derived_antenna_gain(const EnergyParams& e) {
  return db_to_linear(30.0 * e.pathloss_exponent - e.pathloss_intercept_db - e.pathloss_margin_db);
}

// Synthetic receiver suites run by validate-receiver.
struct ReceiverSuiteOptions {
  int single_trials = 1000;
  int two_packet_trials = 1000;
  double snr_db = 6.0;                // per-sample SNR of each packet
  double min_cfo_separation_hz = 5.0; // two-packet scenarios
  std::uint64_t seed = 7;
  unsigned threads = 0;
};

inline const std::vector<std::string>& all_figures() {
  static const std::vector<std::string> names{"ee", "lifetime", "delay", "se", "reliability"};
  return names;
}

// Defaults of an experiment run. Retries back off uniformly over 4 s so that a
// collided pair does not repeat in lockstep when M = 1.
inline SystemParams experiment_system_defaults() {
  SystemParams p;
  p.retry_backoff_s = 4.0;
  return p;
}

struct ExperimentConfig {
  SystemParams system = experiment_system_defaults();
  EnergyParams energy;
  bool derive_packet_duration = true;  // Tp = D / (W log2(1 + gamma / Gamma))

  std::vector<double> loads{0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5};
  std::vector<CombiningPolicy> policies{CombiningPolicy::MaxRatio};
  std::vector<int> replica_counts{1, 2, 4};
  std::vector<double> coding_rates{1.0, 0.5};
  std::vector<std::uint64_t> seeds{1};
  int reps = 3;
  double packets_per_trial = 2e4;
  int max_retries = 5;
  bool per_device_power = true;
  bool clamp_power = false;
  // Fig-4 style KPIs spend one packet's energy across its replicas; the
  // reliability sweep gives every replica full power.
  bool kpi_split_power = true;
  bool reliability_split_power = false;

  LifetimeMode lifetime_mode = LifetimeMode::Corrected;
  MixtureMode mixture = MixtureMode::PoissonMixture;
  MrcOutageModel mrc_model = MrcOutageModel::SinrSum;
  BaseLaw base_law = BaseLaw::Oracle;
  std::size_t oracle_samples = 1'000'000;

  double divergence_tolerance = 0.03;  // |Po analytic - Po empirical|
  std::vector<std::string> figures = all_figures();
  std::vector<double> tack_values{0.25, 0.5, 1.0, 2.0};
  std::string output_dir = "results";
  unsigned threads = 0;

  ReceiverSuiteOptions receiver;
};

namespace detail {

using json = nlohmann::json;

inline void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw InvalidParams(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw InvalidParams("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& ex) {
    throw InvalidParams(std::string("bad value for '") + key + "': " + ex.what());
  }
}

inline void read_db(const json& j, const char* key, double& linear) {
  if (!j.contains(key)) return;
  double db = 0.0;
  read(j, key, db);
  linear = db_to_linear(db);
}

inline void apply_system(const json& j, SystemParams& p, bool& derive_tp) {
  reject_unknown(j,
                 {"bandwidth_hz", "max_cfo_hz", "sample_rate_hz", "symbol_duration_s", "packet_duration_s",
                  "packet_bits", "overhead_bits", "required_snr_db", "snr_gap_db", "sinr_threshold_db",
                  "noise_density_dbm_per_hz", "preamble_length", "zc_root", "vf_slots", "replicas", "max_frame_s",
                  "ack_wait_s", "retry_backoff_s", "split_replica_power", "derive_packet_duration"},
                 "system");
  read(j, "bandwidth_hz", p.bandwidth_hz);
  read(j, "max_cfo_hz", p.max_cfo_hz);
  read(j, "sample_rate_hz", p.sample_rate_hz);
  read(j, "symbol_duration_s", p.symbol_duration_s);
  read(j, "packet_bits", p.packet_bits);
  read(j, "overhead_bits", p.overhead_bits);
  // St follows gamma (St = gamma / 2) unless given explicitly.
  const double st_ratio = p.sinr_threshold / p.required_snr;
  read_db(j, "required_snr_db", p.required_snr);
  p.sinr_threshold = st_ratio * p.required_snr;
  read_db(j, "snr_gap_db", p.snr_gap);
  read_db(j, "sinr_threshold_db", p.sinr_threshold);
  if (j.contains("noise_density_dbm_per_hz")) {
    double dbm = 0.0;
    read(j, "noise_density_dbm_per_hz", dbm);
    p.noise_density = db_to_linear(dbm - 30.0);
  }
  read(j, "preamble_length", p.preamble_length);
  read(j, "zc_root", p.zc_root);
  read(j, "vf_slots", p.vf_slots);
  read(j, "replicas", p.replicas);
  read(j, "max_frame_s", p.max_frame_s);
  read(j, "ack_wait_s", p.ack_wait_s);
  read(j, "retry_backoff_s", p.retry_backoff_s);
  read(j, "split_replica_power", p.split_replica_power);
  read(j, "derive_packet_duration", derive_tp);
  if (j.contains("packet_duration_s")) {
    read(j, "packet_duration_s", p.packet_duration_s);
    if (!j.contains("derive_packet_duration")) derive_tp = false;
  }
}

inline void apply_energy(const json& j, EnergyParams& e) {
  reject_unknown(j,
                 {"battery_j", "report_period_s", "static_energy_j", "circuit_power_w", "pa_inverse_efficiency",
                  "cell_radius_m", "inner_radius_m", "antenna_gain_db", "pathloss_exponent", "pathloss_intercept_db",
                  "pathloss_margin_db", "tx_power_min_w", "tx_power_max_w", "sync_energy_j", "sync_delay_s",
                  "ra_period_s", "ra_opportunities", "ra_preamble_s", "ra_max_attempts", "device_count"},
                 "energy");
  read(j, "battery_j", e.battery_j);
  read(j, "report_period_s", e.report_period_s);
  read(j, "static_energy_j", e.static_energy_j);
  read(j, "circuit_power_w", e.circuit_power_w);
  read(j, "pa_inverse_efficiency", e.pa_inverse_efficiency);
  read(j, "cell_radius_m", e.cell_radius_m);
  read(j, "inner_radius_m", e.inner_radius_m);
  read(j, "pathloss_exponent", e.pathloss_exponent);
  read(j, "pathloss_intercept_db", e.pathloss_intercept_db);
  read(j, "pathloss_margin_db", e.pathloss_margin_db);
  e.antenna_gain = derived_antenna_gain(e);
  read_db(j, "antenna_gain_db", e.antenna_gain);
  read(j, "tx_power_min_w", e.tx_power_min_w);
  read(j, "tx_power_max_w", e.tx_power_max_w);
  read(j, "sync_energy_j", e.sync_energy_j);
  read(j, "sync_delay_s", e.sync_delay_s);
  read(j, "ra_period_s", e.ra_period_s);
  read(j, "ra_opportunities", e.ra_opportunities);
  read(j, "ra_preamble_s", e.ra_preamble_s);
  read(j, "ra_max_attempts", e.ra_max_attempts);
  read(j, "device_count", e.device_count);
}

inline void apply_receiver(const json& j, ReceiverSuiteOptions& r) {
  reject_unknown(j, {"single_trials", "two_packet_trials", "snr_db", "min_cfo_separation_hz", "seed"}, "receiver");
  read(j, "single_trials", r.single_trials);
  read(j, "two_packet_trials", r.two_packet_trials);
  read(j, "snr_db", r.snr_db);
  read(j, "min_cfo_separation_hz", r.min_cfo_separation_hz);
  read(j, "seed", r.seed);
}

}  // namespace detail

inline LifetimeMode parse_lifetime_mode(const std::string& s) {
  if (s == "corrected") return LifetimeMode::Corrected;
  if (s == "paper-literal") return LifetimeMode::PaperLiteral;
  throw InvalidArgument("unknown lifetime mode '" + s + "'");
}

inline MixtureMode parse_mixture(const std::string& s) {
  if (s == "poisson-mixture") return MixtureMode::PoissonMixture;
  if (s == "mean-count") return MixtureMode::MeanCount;
  throw InvalidArgument("unknown mixture mode '" + s + "'");
}

inline MrcOutageModel parse_mrc_model(const std::string& s) {
  if (s == "sinr-sum") return MrcOutageModel::SinrSum;
  if (s == "summed-area") return MrcOutageModel::SummedArea;
  throw InvalidArgument("unknown MRC outage model '" + s + "'");
}

inline BaseLaw parse_base_law(const std::string& s) {
  if (s == "oracle") return BaseLaw::Oracle;
  if (s == "paper-literal") return BaseLaw::PaperLiteral;
  throw InvalidArgument("unknown interference law '" + s + "'");
}

inline std::string to_string(LifetimeMode m) { return m == LifetimeMode::Corrected ? "corrected" : "paper-literal"; }
inline std::string to_string(MixtureMode m) { return m == MixtureMode::PoissonMixture ? "poisson-mixture" : "mean-count"; }
inline std::string to_string(MrcOutageModel m) { return m == MrcOutageModel::SinrSum ? "sinr-sum" : "summed-area"; }
inline std::string to_string(BaseLaw b) { return b == BaseLaw::Oracle ? "oracle" : "paper-literal"; }

// Checks the experiment-level invariants and the parameter sets.
inline void validate(const ExperimentConfig& c) {
  for (std::size_t i = 1; i < c.loads.size(); ++i)
    require(c.loads[i] > c.loads[i - 1], "load grid must be strictly ascending");
  for (double x : c.loads) require(x >= 0.0 && std::isfinite(x), "loads must be finite and non-negative");
  require(c.reps >= 1, "reps must be at least 1");
  require(!c.seeds.empty(), "need at least one seed");
  require(std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() == c.seeds.size(), "seeds must be distinct");
  require(c.packets_per_trial >= 1.0, "packets_per_trial must be at least 1");
  require(c.max_retries >= 0, "max_retries must be non-negative");
  require(!c.replica_counts.empty(), "need at least one replica count");
  for (int n : c.replica_counts) require(n >= 1, "replica counts must be positive");
  for (double cr : c.coding_rates) require(cr > 0.0 && cr <= 1.0, "coding rates must lie in (0, 1]");
  for (const auto& f : c.figures)
    require(std::find(all_figures().begin(), all_figures().end(), f) != all_figures().end(), "unknown figure '" + f + "'");
  for (double t : c.tack_values) require(t >= 0.0, "Tack values must be non-negative");
  require(c.divergence_tolerance > 0.0, "divergence tolerance must be positive");
  require(c.receiver.single_trials >= 0 && c.receiver.two_packet_trials >= 0, "receiver trial counts must be >= 0");
  validate(c.system);
  validate(c.energy);
}

// Applies the keys present in `j` on top of `c`. Unknown keys are errors, so a
// misspelt parameter cannot silently fall back to its default.
inline void apply_config(const nlohmann::json& j, ExperimentConfig& c) {
  using detail::read;
  detail::reject_unknown(j,
                         {"system", "energy", "loads", "policies", "replica_counts", "coding_rates", "seeds", "reps",
                          "packets_per_trial", "max_retries", "per_device_power", "clamp_power", "kpi_split_power",
                          "reliability_split_power", "lifetime_mode", "mixture", "mrc_outage", "base_law",
                          "oracle_samples", "divergence_tolerance", "figures", "tack_values", "output_dir", "threads",
                          "receiver"},
                         "config");
  if (j.contains("system")) detail::apply_system(j.at("system"), c.system, c.derive_packet_duration);
  if (j.contains("energy")) detail::apply_energy(j.at("energy"), c.energy);
  if (j.contains("receiver")) detail::apply_receiver(j.at("receiver"), c.receiver);
  read(j, "loads", c.loads);
  if (j.contains("policies")) {
    std::vector<std::string> names;
    read(j, "policies", names);
    c.policies.clear();
    for (const auto& n : names) c.policies.push_back(parse_policy(n));
  }
  read(j, "replica_counts", c.replica_counts);
  read(j, "coding_rates", c.coding_rates);
  read(j, "seeds", c.seeds);
  read(j, "reps", c.reps);
  read(j, "packets_per_trial", c.packets_per_trial);
  read(j, "max_retries", c.max_retries);
  read(j, "per_device_power", c.per_device_power);
  read(j, "clamp_power", c.clamp_power);
  read(j, "kpi_split_power", c.kpi_split_power);
  read(j, "reliability_split_power", c.reliability_split_power);
  std::string s;
  if (j.contains("lifetime_mode")) read(j, "lifetime_mode", s), c.lifetime_mode = parse_lifetime_mode(s);
  if (j.contains("mixture")) read(j, "mixture", s), c.mixture = parse_mixture(s);
  if (j.contains("mrc_outage")) read(j, "mrc_outage", s), c.mrc_model = parse_mrc_model(s);
  if (j.contains("base_law")) read(j, "base_law", s), c.base_law = parse_base_law(s);
  read(j, "oracle_samples", c.oracle_samples);
  read(j, "divergence_tolerance", c.divergence_tolerance);
  read(j, "figures", c.figures);
  read(j, "tack_values", c.tack_values);
  read(j, "output_dir", c.output_dir);
  read(j, "threads", c.threads);
}

// Finalises derived quantities and validates.
inline void finalize(ExperimentConfig& c) {
  if (c.derive_packet_duration) update_packet_duration(c.system);
  validate(c);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidParams("config '" + path + "' is not valid JSON: " + ex.what());
  }
  ExperimentConfig c;
  apply_config(j, c);
  finalize(c);
  return c;
}

// The effective configuration, for the run summary.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  const auto& p = c.system;
  const auto& e = c.energy;
  nlohmann::json j;
  j["system"] = {{"bandwidth_hz", p.bandwidth_hz},
                 {"max_cfo_hz", p.max_cfo_hz},
                 {"sample_rate_hz", p.sample_rate_hz},
                 {"symbol_duration_s", p.symbol_duration_s},
                 {"packet_duration_s", p.packet_duration_s},
                 {"packet_bits", p.packet_bits},
                 {"overhead_bits", p.overhead_bits},
                 {"required_snr_db", linear_to_db(p.required_snr)},
                 {"snr_gap_db", linear_to_db(p.snr_gap)},
                 {"sinr_threshold_db", linear_to_db(p.sinr_threshold)},
                 {"noise_density_dbm_per_hz", linear_to_db(p.noise_density) + 30.0},
                 {"preamble_length", p.preamble_length},
                 {"zc_root", p.zc_root},
                 {"max_frame_s", p.max_frame_s},
                 {"ack_wait_s", p.ack_wait_s},
                 {"retry_backoff_s", p.retry_backoff_s}};
  j["energy"] = {{"battery_j", e.battery_j},
                 {"report_period_s", e.report_period_s},
                 {"static_energy_j", e.static_energy_j},
                 {"circuit_power_w", e.circuit_power_w},
                 {"pa_inverse_efficiency", e.pa_inverse_efficiency},
                 {"cell_radius_m", e.cell_radius_m},
                 {"inner_radius_m", e.inner_radius_m},
                 {"antenna_gain_db", linear_to_db(e.antenna_gain)},
                 {"pathloss_exponent", e.pathloss_exponent},
                 {"sync_energy_j", e.sync_energy_j},
                 {"sync_delay_s", e.sync_delay_s},
                 {"ra_period_s", e.ra_period_s},
                 {"ra_opportunities", e.ra_opportunities},
                 {"ra_preamble_s", e.ra_preamble_s},
                 {"ra_max_attempts", e.ra_max_attempts},
                 {"device_count", e.device_count}};
  std::vector<std::string> pols;
  for (auto pol : c.policies) pols.push_back(to_string(pol));
  j["loads"] = c.loads;
  j["policies"] = pols;
  j["replica_counts"] = c.replica_counts;
  j["coding_rates"] = c.coding_rates;
  j["seeds"] = c.seeds;
  j["reps"] = c.reps;
  j["packets_per_trial"] = c.packets_per_trial;
  j["max_retries"] = c.max_retries;
  j["per_device_power"] = c.per_device_power;
  j["kpi_split_power"] = c.kpi_split_power;
  j["reliability_split_power"] = c.reliability_split_power;
  j["lifetime_mode"] = to_string(c.lifetime_mode);
  j["mixture"] = to_string(c.mixture);
  j["mrc_outage"] = to_string(c.mrc_model);
  j["base_law"] = to_string(c.base_law);
  j["oracle_samples"] = c.oracle_samples;
  j["divergence_tolerance"] = c.divergence_tolerance;
  j["figures"] = c.figures;
  j["tack_values"] = c.tack_values;
  return j;
}

}  // namespace gfra
