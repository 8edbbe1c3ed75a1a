#include <cmath>
#include <string>

#include <gtest/gtest.h>

#include "gfra/config.hpp"

using namespace gfra;
using nlohmann::json;

namespace {

const std::string kDefault = std::string(GFRA_SOURCE_DIR) + "/configs/default.json";

ExperimentConfig from(const json& j) {
  ExperimentConfig c;
  apply_config(j, c);
  finalize(c);
  return c;
}

}  // namespace

TEST(Config, ShippedDefaultReproducesBuiltins) {
  const auto c = load_config(kDefault);
  const ExperimentConfig d;
  EXPECT_DOUBLE_EQ(c.system.packet_duration_s, 0.5);
  EXPECT_NEAR(c.system.sinr_threshold, 0.5 * c.system.required_snr, 1e-15);
  EXPECT_NEAR(c.system.required_snr, db_to_linear(6.0), 1e-15);
  EXPECT_NEAR(c.energy.antenna_gain / d.energy.antenna_gain, 1.0, 1e-12);
  EXPECT_EQ(c.system.retry_backoff_s, 4.0);
  EXPECT_EQ(c.loads, d.loads);
  EXPECT_EQ(c.replica_counts, d.replica_counts);
  EXPECT_EQ(c.coding_rates, d.coding_rates);
  EXPECT_EQ(c.reps, d.reps);
  EXPECT_EQ(c.figures, all_figures());
  EXPECT_EQ(c.mrc_model, MrcOutageModel::SinrSum);
  EXPECT_EQ(c.base_law, BaseLaw::Oracle);
}

TEST(Config, DerivedAntennaGainMatchesDefault) {
  EnergyParams e;
  EXPECT_NEAR(derived_antenna_gain(e) / e.antenna_gain, 1.0, 1e-12);
}

TEST(Config, PartialOverride) {
  const auto c = from(json{{"system", {{"bandwidth_hz", 400}}}, {"reps", 7}});
  EXPECT_EQ(c.system.bandwidth_hz, 400.0);
  // Tp is rederived from D / (W log2(1 + gamma / Gamma)).
  EXPECT_DOUBLE_EQ(c.system.packet_duration_s, 0.25);
  EXPECT_EQ(c.reps, 7);
  EXPECT_EQ(c.system.max_cfo_hz, 100.0);
}

TEST(Config, ExplicitPacketDurationStopsDerivation) {
  const auto c = from(json{{"system", {{"packet_duration_s", 0.8}}}});
  EXPECT_FALSE(c.derive_packet_duration);
  EXPECT_DOUBLE_EQ(c.system.packet_duration_s, 0.8);
}

TEST(Config, ThresholdFollowsGamma) {
  auto c = from(json{{"system", {{"required_snr_db", 10.0}}}});
  EXPECT_NEAR(c.system.sinr_threshold, 0.5 * db_to_linear(10.0), 1e-12);
  c = from(json{{"system", {{"required_snr_db", 10.0}, {"sinr_threshold_db", 10.0}}}});
  EXPECT_NEAR(c.system.sinr_threshold, c.system.required_snr, 1e-12);
}

TEST(Config, EnumsParse) {
  const auto c = from(json{{"lifetime_mode", "paper-literal"},
                           {"mixture", "mean-count"},
                           {"mrc_outage", "summed-area"},
                           {"base_law", "paper-literal"},
                           {"policies", {"sc", "none"}}});
  EXPECT_EQ(c.lifetime_mode, LifetimeMode::PaperLiteral);
  EXPECT_EQ(c.mixture, MixtureMode::MeanCount);
  EXPECT_EQ(c.mrc_model, MrcOutageModel::SummedArea);
  EXPECT_EQ(c.base_law, BaseLaw::PaperLiteral);
  ASSERT_EQ(c.policies.size(), 2u);
  EXPECT_EQ(c.policies[0], CombiningPolicy::Selection);
  EXPECT_THROW(from(json{{"mixture", "poisson"}}), InvalidArgument);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(from(json{{"lods", {0.1}}}), InvalidParams);
  EXPECT_THROW(from(json{{"system", {{"bandwith_hz", 200}}}}), InvalidParams);
  EXPECT_THROW(from(json{{"energy", {{"battery", 1}}}}), InvalidParams);
  EXPECT_THROW(from(json{{"receiver", {{"trials", 5}}}}), InvalidParams);
  EXPECT_THROW(from(json{{"system", 3}}), InvalidParams);
}

TEST(Config, InvalidValuesRejected) {
  EXPECT_THROW(from(json{{"loads", {0.2, 0.1}}}), InvalidParams);
  EXPECT_THROW(from(json{{"loads", {0.1, 0.1}}}), InvalidParams);
  EXPECT_THROW(from(json{{"loads", {-0.1}}}), InvalidParams);
  EXPECT_THROW(from(json{{"seeds", {3, 3}}}), InvalidParams);
  EXPECT_THROW(from(json{{"seeds", json::array()}}), InvalidParams);
  EXPECT_THROW(from(json{{"reps", 0}}), InvalidParams);
  EXPECT_THROW(from(json{{"reps", "three"}}), InvalidParams);
  EXPECT_THROW(from(json{{"coding_rates", {1.5}}}), InvalidParams);
  EXPECT_THROW(from(json{{"figures", {"ee", "bogus"}}}), InvalidParams);
  EXPECT_THROW(from(json{{"system", {{"bandwidth_hz", -1}}}}), InvalidParams);
  EXPECT_THROW(from(json{{"system", {{"sinr_threshold_db", 9}}}}), InvalidParams);
}

TEST(Config, EmptyLoadGridIsValid) {
  const auto c = from(json{{"loads", json::array()}});
  EXPECT_TRUE(c.loads.empty());
}

TEST(Config, MissingFileIsIoError) {
  EXPECT_THROW(load_config("/nonexistent/gfra.json"), IoError);
}

TEST(Config, RoundTripThroughJson) {
  const auto c = load_config(kDefault);
  const auto j = to_json(c);
  EXPECT_EQ(j.at("loads").get<std::vector<double>>(), c.loads);
  EXPECT_EQ(j.at("mrc_outage").get<std::string>(), "sinr-sum");
  EXPECT_DOUBLE_EQ(j.at("system").at("packet_duration_s").get<double>(), 0.5);
}
