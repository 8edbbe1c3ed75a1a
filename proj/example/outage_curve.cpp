// Analytic and simulated outage of N = 2 replicas with MRC over a few loads.
#include <cstdio>

#include "gfra/interference.hpp"
#include "gfra/sweep.hpp"

int main() {
  using namespace gfra;
  SystemParams p;
  update_packet_duration(p);
  p.replicas = 2;
  p.vf_slots = default_vf_slots(2);
  p.retry_backoff_s = 4.0;
  EnergyParams e;

  AnalyticOutage model(p, make_base_law(p, BaseLaw::Oracle, 1, 200'000), CombiningPolicy::MaxRatio);
  TrialConfig cfg;
  cfg.rule.policy = CombiningPolicy::MaxRatio;

  std::printf("%6s %12s %12s %12s\n", "load", "Po analytic", "Po sim", "load meas");
  for (double x : {0.02, 0.05, 0.1, 0.2}) {
    const double lambda = lambda_for_load(x, p);
    const LoadPoint lp = solve_offered_load(lambda, p, model);
    Rng rng = substream(42, static_cast<std::uint64_t>(x * 1000));
    const TrialResult t = run_trial(rng, lambda, horizon_for(lambda, 2e4, p, cfg), p, e, cfg);
    std::printf("%6.2f %12.5f %12.5f %12.4f\n", x, lp.outage, t.kpi.outage, t.offered_load);
  }
}
