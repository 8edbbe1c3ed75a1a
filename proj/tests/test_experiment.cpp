#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "gfra/experiment.hpp"

using namespace gfra;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config(const fs::path& dir) {
  ExperimentConfig c;
  c.loads = {0.05, 0.2};
  c.replica_counts = {1, 2};
  c.reps = 2;
  c.packets_per_trial = 400;
  c.oracle_samples = 100'000;
  c.tack_values = {0.5};
  c.output_dir = dir.string();
  finalize(c);
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("gfra_test_" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST(Compare, CrossoverAfterGrantFreeWin) {
  const std::vector<double> loads{0.1, 0.2, 0.3, 0.4};
  const auto c = detail::compare(loads, {5, 4, 2, 1}, {3, 3, 3, 3}, true);
  EXPECT_EQ(c.grant_free_better, (std::vector<double>{0.1, 0.2}));
  EXPECT_EQ(c.granted_better, (std::vector<double>{0.3, 0.4}));
  EXPECT_DOUBLE_EQ(c.crossover, 0.3);
}

TEST(Compare, NoCrossoverWithoutGrantFreeWin) {
  const std::vector<double> loads{0.1, 0.2};
  EXPECT_TRUE(std::isnan(detail::compare(loads, {1, 1}, {2, 2}, true).crossover));
  // Lower is better for delay.
  const auto d = detail::compare(loads, {1, 5}, {2, 2}, false);
  EXPECT_DOUBLE_EQ(d.crossover, 0.2);
}

TEST(Compare, SkipsUnmeasuredPoints) {
  const std::vector<double> loads{0.1, 0.2, 0.3};
  const auto c = detail::compare(loads, {5, NAN, 1}, {3, 9, 3}, true);
  EXPECT_DOUBLE_EQ(c.crossover, 0.3);
  // An infinite delay still ranks.
  EXPECT_DOUBLE_EQ(detail::compare(loads, {1, 1, INFINITY}, {2, 2, 2}, false).crossover, 0.3);
}

TEST(Experiment, RowCounts) {
  const auto c = small_config(scratch("rows"));
  const auto r = compute_experiment(c);
  // Grant-free rows per load, policy and N, plus one granted row per load and N.
  EXPECT_EQ(r.kpi_rows.size(), 2u * 1u * 2u + 2u * 2u);
  EXPECT_EQ(r.reliability_rows.size(), 2u * 2u * 2u);
  for (const auto& row : r.reliability_rows) {
    EXPECT_GE(row.empirical_success.mean, 0.0);
    EXPECT_LE(row.empirical_success.mean, 1.0);
    EXPECT_EQ(std::isnan(row.analytic_success), row.coding_rate != 1.0);
  }
  for (const auto& row : r.kpi_rows) {
    if (row.scheme == "granted") continue;
    const auto p = detail::with_replicas(c.system, row.replicas);
    EXPECT_NEAR(row.lambda * row.replicas, p.rate_from_load(row.load), 1e-12);
  }
  EXPECT_TRUE(r.summary.contains("crossovers"));
  EXPECT_TRUE(r.summary.contains("ack_wait_sensitivity"));
}

TEST(Experiment, TinyToleranceFlagsDivergence) {
  auto c = small_config(scratch("div"));
  c.figures = {"ee"};
  c.divergence_tolerance = 1e-9;
  const auto r = compute_experiment(c);
  std::size_t flagged = 0;
  for (const auto& row : r.kpi_rows) flagged += row.diverged;
  EXPECT_GT(flagged, 0u);
  EXPECT_EQ(r.summary.at("divergent_rows").get<std::size_t>(), flagged);
}

TEST(Experiment, EmptyLoadGridWritesHeaders) {
  const auto dir = scratch("empty");
  auto c = small_config(dir);
  c.loads.clear();
  run_experiment(c);
  for (const char* name : {"ee", "lifetime", "delay", "se", "reliability"}) {
    const auto text = slurp(dir / (std::string("fig-") + name + ".csv"));
    ASSERT_FALSE(text.empty()) << name;
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1) << name;
  }
  EXPECT_TRUE(fs::exists(dir / "summary.json"));
  fs::remove_all(dir);
}

TEST(Experiment, RerunIsByteIdentical) {
  const auto a = scratch("rerun_a"), b = scratch("rerun_b");
  auto c = small_config(a);
  c.figures = {"ee", "reliability"};
  run_experiment(c);
  c.output_dir = b.string();
  c.threads = 3;
  run_experiment(c);
  for (const char* f : {"fig-ee.csv", "fig-reliability.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  EXPECT_FALSE(fs::exists(a / "fig-delay.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Experiment, UnwritableDirectoryIsIoError) {
  const auto dir = scratch("blocked");
  { std::ofstream(dir.string()) << "a file, not a directory"; }
  auto c = small_config(dir);
  EXPECT_THROW(run_experiment(c), IoError);
  fs::remove(dir);
}

TEST(Experiment, CsvHeaderAndNanRendering) {
  KpiRow row;
  row.scheme = "grant-free";
  row.policy = CombiningPolicy::Selection;
  row.analytic.energy_efficiency = NAN;
  std::ostringstream os;
  write_kpi_csv(os, {row}, Kpi::EnergyEfficiency);
  const auto s = os.str();
  EXPECT_EQ(s.rfind("scheme,policy,replicas", 0), 0u);
  EXPECT_NE(s.find("grant-free,sc,1,1,0,0,nan"), std::string::npos);
}

TEST(ReceiverValidation, SmallRunPasses) {
  SystemParams p;
  ReceiverSuiteOptions o;
  o.single_trials = 40;
  o.two_packet_trials = 40;
  const auto r = validate_receiver(p, o);
  EXPECT_TRUE(r.drift_ok());
  EXPECT_EQ(r.drift_at_zero, 0.0);
  EXPECT_TRUE(r.single_ok());
  EXPECT_EQ(r.single.injected, 40u);
  EXPECT_EQ(r.two_packet.injected, 80u);
  const auto j = to_json(r);
  EXPECT_EQ(j.at("pass").get<bool>(), r.pass());
}
