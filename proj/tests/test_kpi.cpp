#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "gfra/kpi.hpp"
#include "gfra/random.hpp"
#include "gfra/trial.hpp"

using namespace gfra;

TEST(Delay, MatchesRetransmissionSeries) {
  SystemParams p;
  p.retry_backoff_s = 3.0;
  for (double po : {0.0, 0.1, 0.5, 0.9}) {
    // Attempt i ends after i frames, with i - 1 ACK waits and mean backoffs.
    double series = 0.0, weight = 1.0 - po;
    for (int i = 1; i < 5000; ++i) {
      series += weight * (i * p.vf_duration() + (i - 1) * (p.ack_wait_s + 0.5 * p.retry_backoff_s));
      weight *= po;
    }
    EXPECT_NEAR(expected_delay(po, p), series, 1e-9);
  }
  EXPECT_TRUE(std::isinf(expected_delay(1.0, p)));
  EXPECT_THROW(expected_delay(-0.1, p), DomainError);
}

TEST(Delay, NoOutageIsOneFrame) {
  SystemParams p;
  EXPECT_DOUBLE_EQ(expected_delay(0.0, p), p.vf_slots * p.packet_duration_s);
}

TEST(TransmitPower, AverageOverDiscMatchesQuadrature) {
  SystemParams p;
  EnergyParams e;
  // Devices uniform on the disc: density 2 r / Rc^2.
  const double rc = e.cell_radius_m;
  const double avg = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [&](double r) { return tx_power_at(r, p, e) * 2.0 * r / (rc * rc); }, 0.0, rc, 10, 1e-12);
  EXPECT_NEAR(avg_transmit_power(e, p) / avg, 1.0, 1e-9);
}

TEST(TransmitPower, DbModeAgreesWithGainConstant) {
  // The default gain constant encodes 128.1 + 37.6 log10(d/1000) + 20 dB; the dB
  // mode omits the coding gap.
  SystemParams p;
  EnergyParams e;
  for (double d : {50.0, 300.0, 1000.0})
    EXPECT_NEAR(tx_power_at(d, p, e) / (tx_power_db_mode(d, p, e) * p.snr_gap), 1.0, 1e-9);
}

TEST(TransmitPower, ClampWarnsBeyondCoverage) {
  EnergyParams e;
  WarningCapture cap;
  EXPECT_EQ(clamp_tx_power(1.0, e), e.tx_power_max_w);
  EXPECT_EQ(cap.messages().size(), 1u);
  EXPECT_EQ(clamp_tx_power(1e-6, e), e.tx_power_min_w);
  EXPECT_EQ(cap.messages().size(), 1u);
}

TEST(Energy, AttemptEnergyByHand) {
  SystemParams p;  // N = 2, M = 4, Tp = 0.5, Tack = 0.5
  EnergyParams e;
  const double pt = 2e-3;
  const double expect = (1e-3 + 2.5 * pt) * 2 * 0.5 + 1e-3 * 2 * 0.5 + 1e-3 * 0.5;
  EXPECT_NEAR(attempt_energy(e, p, pt), expect, 1e-15);
  p.split_replica_power = true;
  EXPECT_NEAR(attempt_energy(e, p, pt), (1e-3 + 2.5 * pt / 2) * 2 * 0.5 + 1e-3 * 2 * 0.5 + 1e-3 * 0.5, 1e-15);
}

TEST(Lifetime, RenewalMonteCarlo) {
  // Each report costs Est plus a geometric number of attempts.
  SystemParams p;
  EnergyParams e;
  const double pt = avg_transmit_power(e, p), po = 0.3;
  Rng rng(2);
  std::bernoulli_distribution fail(po);
  double energy = 0.0;
  const int reports = 200'000;
  for (int r = 0; r < reports; ++r) {
    energy += e.static_energy_j;
    do energy += attempt_energy(e, p, pt);
    while (fail(rng));
  }
  const double mc = e.battery_j * e.report_period_s / (energy / reports);
  EXPECT_NEAR(battery_lifetime(po, e, p, pt) / mc, 1.0, 0.005);
}

TEST(Lifetime, Modes) {
  SystemParams p;
  EnergyParams e;
  const double pt = avg_transmit_power(e, p);
  EXPECT_EQ(battery_lifetime(1.0, e, p, pt), 0.0);
  EXPECT_THROW(battery_lifetime(0.0, e, p, pt, LifetimeMode::PaperLiteral), DomainError);
  const double per = attempt_energy(e, p, pt);
  EXPECT_NEAR(battery_lifetime(0.25, e, p, pt, LifetimeMode::PaperLiteral),
              e.battery_j * e.report_period_s / (e.static_energy_j + 4.0 * per), 1e-6);
  EXPECT_GT(battery_lifetime(0.0, e, p, pt), battery_lifetime(0.5, e, p, pt));
}

TEST(Efficiency, EnergyAndSpectral) {
  SystemParams p;
  EnergyParams e;
  const double pt = avg_transmit_power(e, p);
  EXPECT_NEAR(energy_efficiency(0.2, e, p, pt), 0.8 * 50.0 / attempt_energy(e, p, pt), 1e-9);
  // lambda (D - Doh) / (2 Fm + W).
  EXPECT_DOUBLE_EQ(spectral_efficiency(2.0, p), 2.0 * 50.0 / 400.0);
  EXPECT_DOUBLE_EQ(spectral_efficiency_success(2.0, 0.25, p), 0.75 * 2.0 * 50.0 / 400.0);
  EXPECT_THROW(spectral_efficiency(-1.0, p), DomainError);
}

TEST(GrantFreeKpis, PaperLiteralZeroOutageGivesNaN) {
  SystemParams p;
  EnergyParams e;
  LoadPoint lp;
  lp.lambda = 0.1;
  lp.outage = 0.0;
  const auto k = grant_free_kpis(lp, e, p, avg_transmit_power(e, p), 5, LifetimeMode::PaperLiteral);
  EXPECT_TRUE(std::isnan(k.battery_lifetime_s));
  EXPECT_DOUBLE_EQ(k.throughput, 0.1);
}

TEST(RandomAccess, ExpectedSingletonsMatchMonteCarlo) {
  Rng rng(3);
  for (int n : {1, 3, 10, 25}) {
    double sum = 0.0;
    const int trials = 40'000;
    for (int t = 0; t < trials; ++t) sum += ra_singletons(rng, n, 10);
    EXPECT_NEAR(sum / trials, ra_expected_successes(n, 10), 0.03 * std::max(1.0, ra_expected_successes(n, 10)));
  }
}

TEST(RandomAccess, EquilibriumSolvesBalance) {
  EnergyParams e;
  for (double lambda : {0.1, 1.0, 2.0}) {
    const auto eq = ra_equilibrium(lambda, e);
    EXPECT_NEAR(eq.contenders, lambda * e.ra_period_s * eq.mean_attempts, 1e-6 * std::max(1.0, eq.contenders));
    EXPECT_NEAR(eq.success_prob, std::exp(-eq.contenders / 10.0), 1e-9);
  }
  EXPECT_TRUE(ra_equilibrium(20.0, e).overload);
  EXPECT_EQ(ra_equilibrium(0.0, e).contenders, 0.0);
}

TEST(RandomAccess, EquilibriumMatchesSimulation) {
  SystemParams p;
  EnergyParams e;
  // Mean-field: the simulated backlog is burstier than Poisson, which costs a
  // few percent. Kept well below the RA capacity R / e per period; nearer to it
  // the simulation can fall into the collapsed state.
  for (double lambda : {0.25, 0.5, 1.0}) {
    const auto eq = ra_equilibrium(lambda, e);
    Rng rng(4);
    TrialConfig cfg;
    const auto r = run_granted_baseline(rng, lambda, 6000.0, p, e, cfg);
    ASSERT_TRUE(r.applicable);
    EXPECT_NEAR(double(r.ra_attempts) / double(r.packets), eq.mean_attempts, 0.05 * eq.mean_attempts) << lambda;
  }
}

TEST(GrantedKpis, LightLoadDelay) {
  SystemParams p;
  EnergyParams e;
  const auto k = granted_kpis(1e-6, e, p, avg_transmit_power(e, p));
  EXPECT_NEAR(k.expected_delay_s, 0.5 * e.ra_period_s + e.sync_delay_s + p.packet_duration_s, 1e-6);
  EXPECT_NEAR(k.outage, 0.0, 1e-12);
}
