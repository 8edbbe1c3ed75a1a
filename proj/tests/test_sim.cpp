#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include <gtest/gtest.h>

#include "gfra/collision.hpp"
#include "gfra/sic.hpp"
#include "gfra/sweep.hpp"
#include "gfra/trial.hpp"

using namespace gfra;

namespace {

Replica rect(PacketId id, double start, double cfo, const SystemParams& p) {
  return Replica{id, start, cfo, p.packet_duration_s, p.bandwidth_hz, 1.0};
}

// Area of the intersection by counting cells of a fine lattice.
double raster_overlap(const Replica& a, const Replica& b, int cells) {
  const double t0 = std::min(a.start_s, b.start_s), t1 = std::max(a.end_s(), b.end_s());
  const double f0 = std::min(a.cfo_hz, b.cfo_hz) - a.bandwidth_hz / 2, f1 = std::max(a.cfo_hz, b.cfo_hz) + a.bandwidth_hz / 2;
  const double dt = (t1 - t0) / cells, df = (f1 - f0) / cells;
  auto inside = [](const Replica& r, double t, double f) {
    return t >= r.start_s && t < r.end_s() && f >= r.cfo_hz - r.bandwidth_hz / 2 && f < r.cfo_hz + r.bandwidth_hz / 2;
  };
  long hits = 0;
  for (int i = 0; i < cells; ++i)
    for (int j = 0; j < cells; ++j) {
      const double t = t0 + (i + 0.5) * dt, f = f0 + (j + 0.5) * df;
      hits += inside(a, t, f) && inside(b, t, f);
    }
  return hits * dt * df;
}

}  // namespace

TEST(Overlap, MatchesRaster) {
  SystemParams p;
  Rng rng(1);
  std::uniform_real_distribution<double> t(0.0, 1.0), f(-100.0, 100.0);
  for (int k = 0; k < 40; ++k) {
    const auto a = rect(0, t(rng), f(rng), p), b = rect(1, t(rng), f(rng), p);
    EXPECT_NEAR(replica_overlap(a, b), raster_overlap(a, b, 600), 0.6) << k;
    EXPECT_DOUBLE_EQ(replica_overlap(a, b), replica_overlap(b, a));
  }
  EXPECT_DOUBLE_EQ(replica_overlap(rect(0, 0, 0, p), rect(1, 0, 0, p)), p.replica_area());
  EXPECT_EQ(replica_overlap(rect(0, 0, 0, p), rect(1, 0.5, 0, p)), 0.0);  // touching edges
}

TEST(CollisionGraph, SweepEqualsAllPairs) {
  SystemParams p;
  Rng rng(2);
  std::uniform_real_distribution<double> t(0.0, 30.0), f(-100.0, 100.0);
  std::vector<Replica> reps;
  for (int k = 0; k < 300; ++k) reps.push_back(rect(k, t(rng), f(rng), p));
  const auto g = build_collision_graph(reps);
  std::vector<std::tuple<int, int, double>> brute;
  for (int a = 0; a < 300; ++a)
    for (int b = a + 1; b < 300; ++b) {
      const double s = replica_overlap(reps[a], reps[b]);
      if (s > 0.0) brute.emplace_back(a, b, s);
    }
  EXPECT_EQ(g.edges(), brute);
  EXPECT_EQ(g.edge_count(), brute.size());
}

TEST(Sic, IsolatedPacketsDecode) {
  SystemParams p;
  p.replicas = 1;
  p.vf_slots = 1;
  const auto g = build_collision_graph({rect(0, 0, 0, p), rect(1, 5, 0, p)});
  const auto out = sic_decode(g, p, {CombiningPolicy::None, 1.0});
  EXPECT_EQ(out.decoded.size(), 2u);
  EXPECT_EQ(out.rounds, 1);
  EXPECT_DOUBLE_EQ(out.delay_s.at(0), p.packet_duration_s);
}

TEST(Sic, FullCollisionFailsWithoutDiversity) {
  SystemParams p;
  p.replicas = 1;
  p.vf_slots = 1;
  const auto g = build_collision_graph({rect(0, 0, 0, p), rect(1, 0, 0, p)});
  // SINR = 1 / (1 + 1/gamma) < gamma / 2.
  EXPECT_TRUE(sic_decode(g, p, {CombiningPolicy::None, 1.0}).decoded.empty());
  EXPECT_TRUE(sic_decode(g, p, {CombiningPolicy::MaxRatio, 1.0}).decoded.empty());
}

TEST(Sic, CancellationUnlocksChain) {
  // A has a clean first replica, C a clean second one; B's replicas collide with
  // A and C and decode only after both are cancelled.
  SystemParams p;
  const auto g = build_collision_graph({rect(0, 0, 0, p), rect(0, 10, 0, p), rect(1, 10, 0, p), rect(1, 30, 0, p),
                                        rect(2, 30, 0, p), rect(2, 50, 0, p)});
  for (auto pol : {CombiningPolicy::None, CombiningPolicy::MaxRatio, CombiningPolicy::Selection}) {
    const auto out = sic_decode(g, p, {pol, 1.0});
    EXPECT_EQ(out.decoded.size(), 3u) << to_string(pol);
    EXPECT_EQ(out.rounds, 2) << to_string(pol);
    EXPECT_EQ(out.decoded.back(), 1) << to_string(pol);
    EXPECT_EQ(out.residual_replicas, 0u);
    EXPECT_EQ(out.decoded_per_round, (std::vector<std::size_t>{2, 1}));
  }
}

TEST(Sic, MrcSumsPartialReplicas) {
  // Both replicas lose a quarter of the band for the whole packet, which leaves
  // each at about gamma / 2; only their sum reaches St = gamma.
  SystemParams p;
  p.sinr_threshold = p.required_snr;  // one clean replica needed without combining
  const auto g = build_collision_graph({rect(0, 0, 0, p), rect(0, 1, 0, p), rect(1, 0, 150, p), rect(2, 1, -150, p)});
  const double one = sinr(0.25 * p.replica_area(), p);
  ASSERT_LT(one, p.sinr_threshold);
  ASSERT_GE(2 * one, p.sinr_threshold);
  auto decoded = [&](CombiningPolicy pol) {
    const auto out = sic_decode(g, p, {pol, 1.0});
    return std::find(out.decoded.begin(), out.decoded.end(), 0) != out.decoded.end();
  };
  EXPECT_TRUE(decoded(CombiningPolicy::MaxRatio));
  EXPECT_FALSE(decoded(CombiningPolicy::None));
}

TEST(Sic, FragmentCombiningNeedsCodingRate) {
  // Replica 1 is hit on its first 40%, replica 2 on its last 40%: every part is
  // clean in some replica, and each replica alone is 60% clean.
  SystemParams p;
  p.sinr_threshold = p.required_snr;
  const double tp = p.packet_duration_s;
  const auto g = build_collision_graph(
      {rect(0, 0, 0, p), rect(0, 10, 0, p), rect(1, -0.6 * tp, 0, p), rect(2, 10 + 0.6 * tp, 0, p)});
  auto decoded = [&](double cr) {
    const auto out = sic_decode(g, p, {CombiningPolicy::Selection, cr});
    return std::find(out.decoded.begin(), out.decoded.end(), 0) != out.decoded.end();
  };
  EXPECT_TRUE(decoded(0.5));
  EXPECT_TRUE(decoded(1.0));  // union of clean fragments covers the packet
  const auto g2 = build_collision_graph(
      {rect(0, 0, 0, p), rect(0, 10, 0, p), rect(1, -0.6 * tp, 0, p), rect(2, 10 - 0.6 * tp, 0, p)});
  // Now both replicas are hit on the same first 40%.
  auto decoded2 = [&](double cr) {
    const auto out = sic_decode(g2, p, {CombiningPolicy::Selection, cr});
    return std::find(out.decoded.begin(), out.decoded.end(), 0) != out.decoded.end();
  };
  EXPECT_TRUE(decoded2(0.5));
  EXPECT_FALSE(decoded2(1.0));
}

TEST(Trial, DeterministicPerSeed) {
  SystemParams p;
  p.retry_backoff_s = 4.0;
  EnergyParams e;
  TrialConfig cfg;
  Rng a(7), b(7);
  const double lambda = lambda_for_load(0.2, p);
  const auto r1 = run_trial(a, lambda, 400.0, p, e, cfg);
  const auto r2 = run_trial(b, lambda, 400.0, p, e, cfg);
  EXPECT_EQ(r1.packets, r2.packets);
  EXPECT_EQ(r1.failed_attempts, r2.failed_attempts);
  EXPECT_EQ(r1.kpi.battery_lifetime_s, r2.kpi.battery_lifetime_s);
}

TEST(Trial, Invariants) {
  SystemParams p;
  p.retry_backoff_s = 4.0;
  EnergyParams e;
  TrialConfig cfg;
  for (double x : {0.05, 0.3}) {
    Rng rng(3);
    const double lambda = lambda_for_load(x, p);
    const auto r = run_trial(rng, lambda, horizon_for(lambda, 5000, p, cfg), p, e, cfg);
    ASSERT_TRUE(r.applicable);
    EXPECT_EQ(r.delivered + r.dropped, r.packets);
    EXPECT_GE(r.attempts, r.packets);
    EXPECT_LE(r.attempts, r.packets * static_cast<std::size_t>(cfg.max_retries + 1));
    EXPECT_GE(r.kpi.outage, 0.0);
    EXPECT_LE(r.kpi.outage, 1.0);
    // Retransmissions only add load.
    EXPECT_GE(r.offered_load, 0.9 * x);
    EXPECT_GE(r.kpi.expected_delay_s, p.packet_duration_s - 1e-9);
  }
}

TEST(Trial, NoTrafficNotApplicable) {
  SystemParams p;
  EnergyParams e;
  Rng rng(1);
  const auto r = run_trial(rng, 0.0, 100.0, p, e, {});
  EXPECT_FALSE(r.applicable);
  EXPECT_THROW(run_trial(rng, -1.0, 100.0, p, e, {}), InvalidArgument);
}

TEST(Trial, LightLoadOutageMatchesAnalyticSingleReplica) {
  // N = 1 without retries: per-attempt outage near the closed form at low load.
  SystemParams p;
  p.replicas = 1;
  p.vf_slots = 1;
  EnergyParams e;
  TrialConfig cfg;
  cfg.rule.policy = CombiningPolicy::None;
  cfg.max_retries = 0;
  const double lambda = lambda_for_load(0.05, p);
  Rng rng(4);
  const auto r = run_trial(rng, lambda, horizon_for(lambda, 50'000, p, cfg), p, e, cfg);
  AnalyticOutage model(p, make_base_law(p, BaseLaw::Oracle, 1, 400'000), CombiningPolicy::None);
  // No retries, so the replica rate is lambda itself rather than the fixed point.
  EXPECT_NEAR(r.kpi.outage, model(lambda), 0.01);
}

TEST(Sweep, ReproducibleAndThreadIndependent) {
  SystemParams p;
  p.retry_backoff_s = 4.0;
  EnergyParams e;
  SweepOptions so;
  so.seeds = {3, 4};
  so.packets_per_trial = 600;
  so.threads = 1;
  const auto a = sweep({0.05, 0.2}, 2, p, e, {CombiningPolicy::MaxRatio}, {1, 2}, so);
  so.threads = 3;
  const auto b = sweep({0.05, 0.2}, 2, p, e, {CombiningPolicy::MaxRatio}, {1, 2}, so);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].empirical.outage.mean, b[i].empirical.outage.mean);
    EXPECT_EQ(a[i].packets, b[i].packets);
    EXPECT_EQ(a[i].empirical.outage.n, 4u);
  }
  EXPECT_EQ(a[0].vf_slots, 1);
  EXPECT_EQ(a[1].vf_slots, 4);
}

TEST(Sweep, StudentTInterval) {
  const auto est = mean_ci({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(est.mean, 2.5);
  // t(0.975, 3) = 3.182446305; sd = 1.290994449.
  EXPECT_NEAR(est.half_width, 3.182446305 * 1.290994449 / 2.0, 1e-8);
  EXPECT_TRUE(std::isinf(mean_ci({1.0}).half_width));
  EXPECT_EQ(mean_ci({}).n, 0u);
}

TEST(Granted, DropsOnlyAfterMaxAttempts) {
  SystemParams p;
  EnergyParams e;
  e.ra_max_attempts = 3;
  Rng rng(6);
  TrialConfig cfg;
  const auto r = run_granted_baseline(rng, 8.0, 2000.0, p, e, cfg);
  ASSERT_TRUE(r.applicable);
  EXPECT_EQ(r.delivered + r.dropped, r.packets);
  EXPECT_LE(r.ra_attempts, 3 * r.packets);
  EXPECT_GT(r.dropped, 0u);
}
