// One line per acceptance criterion; exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "gfra/experiment.hpp"
#include "gfra/mmse.hpp"

using namespace gfra;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Pr(S > s) by numerical quadrature over start offset and CFO difference.
double ccdf_quadrature(double s, const SystemParams& p) {
  using boost::math::quadrature::gauss_kronrod;
  const double tp = p.packet_duration_s, w = p.bandwidth_hz, fm = p.max_cfo_hz;
  auto inner = [&](double u) {
    const double top = w - s / (tp - u);
    if (top <= 0.0) return 0.0;
    return gauss_kronrod<double, 15>::integrate([&](double) { return 1.0 / (2.0 * tp) / (2.0 * fm); }, 0.0, top);
  };
  return 4.0 * gauss_kronrod<double, 61>::integrate(inner, 0.0, tp - s / w, 15, 1e-13);
}

Outcome parameter_consistency() {
  SystemParams p;
  p.packet_bits = 100;
  p.bandwidth_hz = 200;
  p.required_snr = p.snr_gap = db_to_linear(6.0);
  const double tp = packet_duration(p);
  return {tp == 0.5, fmt("Tp = %.17g s", tp)};
}

Outcome interference_law() {
  SystemParams p;
  Rng a(1), b(2);
  const auto fa = overlap_cdf_oracle(a, p, 1'000'000), fb = overlap_cdf_oracle(b, p, 1'000'000);
  double sup = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) sup = std::max(sup, std::abs(fa.cdf[i] - fb.cdf[i]));
  double worst = 0.0;
  int points = 0;
  for (int i = 1; i < 1000; ++i) {
    const double s = p.replica_area() * i / 1000.0;
    const auto c = overlap_ccdf_closed_form(s, p);
    if (c.clamped) continue;
    worst = std::max(worst, std::abs(c.value - ccdf_quadrature(s, p)));
    ++points;
  }
  return {sup < 0.005 && worst < 1e-6 && points > 0,
          fmt("seed sup-distance %.4f (< 0.005); closed form vs quadrature %.2e over %d points (< 1e-6)", sup, worst,
              points)};
}

Outcome analytic_vs_simulation() {
  SystemParams p;  // N = 2, M = 4
  p.retry_backoff_s = 4.0;
  EnergyParams e;
  AnalyticOutage model(p, make_base_law(p, BaseLaw::Oracle, 1, 1'000'000), CombiningPolicy::MaxRatio);
  TrialConfig cfg;
  cfg.rule.policy = CombiningPolicy::MaxRatio;
  const std::vector<double> loads{0.02, 0.05, 0.1, 0.2};
  std::vector<TrialResult> sims(loads.size());
  parallel_for(loads.size(), [&](std::size_t i) {
    const double lambda = lambda_for_load(loads[i], p);
    Rng rng = substream(3, i);
    sims[i] = run_trial(rng, lambda, horizon_for(lambda, 1e5, p, cfg), p, e, cfg);
  });
  bool ok = true;
  std::string d;
  for (std::size_t i = 0; i < loads.size(); ++i) {
    const double an = solve_offered_load(lambda_for_load(loads[i], p), p, model).outage;
    const double em = sims[i].kpi.outage;
    ok = ok && std::abs(an - em) < 0.03 && sims[i].packets >= 90'000;
    d += fmt("load %.2f: analytic %.4f sim %.4f (%zu pkts); ", loads[i], an, em, sims[i].packets);
  }
  return {ok, d + "|diff| < 0.03"};
}

Outcome low_load_reliability() {
  SystemParams p;
  p.replicas = 4;
  p.vf_slots = 8;
  p.retry_backoff_s = 4.0;
  EnergyParams e;
  TrialConfig cfg;
  cfg.rule.policy = CombiningPolicy::Selection;
  cfg.rule.coding_rate = 0.5;
  const double lambda = lambda_for_load(0.01, p);
  Rng rng = substream(4, 0);
  const auto r = run_trial(rng, lambda, horizon_for(lambda, 1e5, p, cfg), p, e, cfg);
  const double ps = r.success_probability();
  return {ps >= 0.999 && r.packets >= 90'000,
          fmt("N=4 SC Cr=0.5 load 0.01: success %.5f over %zu attempts, %zu packets (>= 0.999)", ps, r.attempts,
              r.packets)};
}

// Lifetime and EE come from one sweep: N = 2 MRC with split replica power
// against the granted baseline.
ExperimentResult kpi_sweep() {
  ExperimentConfig c;
  c.replica_counts = {2};
  c.figures = {"ee", "lifetime"};
  c.reps = 2;
  c.packets_per_trial = 2e4;
  c.tack_values = {};
  finalize(c);
  return compute_experiment(c);
}

Outcome lifetime_advantage(const ExperimentResult& res) {
  bool ok = true;
  int points = 0;
  std::string d;
  for (const auto& gf : res.kpi_rows) {
    if (gf.scheme != "grant-free" || gf.load > 0.1) continue;
    for (const auto& gr : res.kpi_rows) {
      if (gr.scheme != "granted" || gr.load != gf.load) continue;
      const double ra = gf.analytic.battery_lifetime_s / gr.analytic.battery_lifetime_s;
      const double re = gf.empirical.battery_lifetime_s.mean / gr.empirical.battery_lifetime_s.mean;
      ok = ok && ra >= 1.5 && re >= 1.5;
      ++points;
      d += fmt("load %.2f: %.2fx analytic, %.2fx sim; ", gf.load, ra, re);
    }
  }
  return {ok && points > 0, d + "need >= 1.5x"};
}

Outcome ee_crossover(const ExperimentResult& res) {
  const auto& s = res.summary.at("crossovers").at("ee").at("N=2/mrc");
  auto crossing = [](const nlohmann::json& j) {
    return j.at("crossover_load").is_null() ? std::string("none") : fmt("%.2f", j.at("crossover_load").get<double>());
  };
  const bool ok = !s.at("empirical").at("crossover_load").is_null();
  return {ok, "grant-free EE wins below and granted EE wins at load " + crossing(s.at("empirical")) +
                  " (sim); analytic crossover " + crossing(s.at("analytic"))};
}

Outcome receiver_chain() {
  SystemParams p;
  const auto r = validate_receiver(p, ReceiverSuiteOptions{});
  return {r.pass(), fmt("single: %zu bit errors, %zu misses over %zu trials; two-packet: FP %.4f (< 0.01), miss %.4f "
                        "(< 0.05); Q(0)=%g, max|Q|=%ld <= %ld samples",
                        r.single.bit_errors, r.single.misses, r.single.trials, r.two_packet.false_positive_rate(),
                        r.two_packet.miss_rate(), r.drift_at_zero, r.max_abs_drift, r.drift_bound)};
}

Outcome mmse() {
  Rng rng(8);
  std::uniform_int_distribution<int> branches(1, 8);
  std::uniform_real_distribution<double> logp(-3.0, 3.0);
  double worst = 0.0, worst_sum = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double sx2 = std::pow(10.0, logp(rng));
    std::vector<double> si2(static_cast<std::size_t>(branches(rng)));
    for (auto& s : si2) s = std::pow(10.0, logp(rng));
    const auto w = mmse_weights(sx2, si2);
    // Residual of (sx2 1 1^T + diag(si2)) w = sx2 1, computed here directly.
    double num = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      double row = si2[i] * w[i];
      for (double wj : w) row += sx2 * wj;
      num += (row - sx2) * (row - sx2);
    }
    worst = std::max(worst, std::sqrt(num / (double(w.size()) * sx2 * sx2)));
  }
  for (int n = 1; n <= 8; ++n) {
    const std::vector<double> si2(static_cast<std::size_t>(n), 0.37);
    const double got = combined_sinr(2.1, si2, mmse_weights(2.1, si2));
    worst_sum = std::max(worst_sum, std::abs(got / (n * 2.1 / 0.37) - 1.0));
  }
  return {worst < 1e-9 && worst_sum < 1e-9,
          fmt("max relative residual %.2e over 1000 instances; equal-noise N x SINR rel. error %.2e", worst, worst_sum)};
}

Outcome pure_aloha() {
  SystemParams p;
  p.replicas = 1;
  p.vf_slots = 1;
  p.max_cfo_hz = 0.0;
  p.sinr_threshold = p.required_snr;  // any overlap destroys the packet
  p.retry_backoff_s = 4.0;
  EnergyParams e;
  TrialConfig cfg;
  cfg.rule.policy = CombiningPolicy::None;
  cfg.max_retries = 0;
  std::vector<double> loads;
  for (int i = 1; i <= 10; ++i) loads.push_back(0.1 * i);
  std::vector<TrialResult> r(loads.size());
  parallel_for(loads.size(), [&](std::size_t i) {
    const double lambda = lambda_for_load(loads[i], p);
    Rng rng = substream(9, i);
    r[i] = run_trial(rng, lambda, horizon_for(lambda, 1e5, p, cfg), p, e, cfg);
  });
  // 99.9% binomial interval per point, about 1% family-wise over ten points.
  const double z = 3.29;
  bool within = true, monotone = true;
  std::size_t peak = 0;
  std::vector<double> thr;
  for (std::size_t i = 0; i < loads.size(); ++i) {
    const double ps = r[i].success_probability();
    const double g = r[i].offered_load;
    const double hw = z * std::sqrt(ps * (1.0 - ps) / double(r[i].attempts));
    within = within && std::abs(ps - std::exp(-2.0 * g)) <= hw;
    if (i > 0) monotone = monotone && ps < r[i - 1].success_probability();
    thr.push_back(g * ps);
    if (thr[i] > thr[peak]) peak = i;
  }
  const double at = loads[peak];
  const bool ok = within && monotone && std::abs(at - 0.5) <= 0.1 + 1e-9;
  return {ok, fmt("Ps(0.5) = %.4f vs exp(-1) = %.4f; within CI at all points: %s; monotone: %s; throughput peak at %.1f",
                  r[4].success_probability(), std::exp(-2.0 * r[4].offered_load), within ? "yes" : "no",
                  monotone ? "yes" : "no", at)};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), s);
    std::fflush(stdout);
    failed += !o.pass;
  };
  report(1, "parameter consistency", parameter_consistency);
  report(2, "interference law", interference_law);
  report(3, "analytic vs simulated outage", analytic_vs_simulation);
  report(4, "low-load reliability", low_load_reliability);
  ExperimentResult sweep_result;
  bool swept = false;
  auto with_sweep = [&](auto fn) {
    return [&, fn]() {
      if (!swept) sweep_result = kpi_sweep(), swept = true;
      return fn(sweep_result);
    };
  };
  report(5, "battery lifetime advantage", with_sweep(lifetime_advantage));
  report(6, "EE crossover", with_sweep(ee_crossover));
  report(7, "receiver chain", receiver_chain);
  report(8, "MMSE combining", mmse);
  report(9, "pure ALOHA reduction", pure_aloha);
  std::printf("%d of 9 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
