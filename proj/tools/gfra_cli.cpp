#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "gfra/config.hpp"
#include "gfra/error.hpp"
#include "gfra/experiment.hpp"

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grant-free replica random access: analytic model, simulator and receiver chain"};
  app.require_subcommand(1);

  std::string config_path, out_dir, figures, lifetime, mixture, mrc, law;
  std::uint64_t seed = 0;
  int reps = 0;
  double packets = 0.0;
  unsigned threads = 0;
  bool paper_literal = false;

  auto* run = app.add_subcommand("run", "sweep loads, N and policies and write the figure CSVs");
  run->add_option("-c,--config", config_path, "JSON config; keys not given keep their defaults")->check(CLI::ExistingFile);
  run->add_option("-o,--out", out_dir, "output directory");
  run->add_option("-s,--seed", seed, "run with this single master seed");
  run->add_option("--figures", figures, "comma-separated subset of ee,lifetime,delay,se,reliability");
  run->add_flag("--paper-literal", paper_literal, "printed lifetime factor and closed-form interference law");
  run->add_option("--lifetime-mode", lifetime, "corrected | paper-literal");
  run->add_option("--mixture", mixture, "poisson-mixture | mean-count");
  run->add_option("--mrc-outage", mrc, "sinr-sum | summed-area");
  run->add_option("--interference-law", law, "oracle | paper-literal");
  run->add_option("--reps", reps, "trials per seed and cell");
  run->add_option("--packets", packets, "new packets per trial");
  run->add_option("-j,--threads", threads, "worker threads, 0 = all cores");

  std::string rx_config, rx_out;
  std::uint64_t rx_seed = 0;
  int rx_trials = 0;
  auto* rx = app.add_subcommand("validate-receiver", "run the synthetic receiver suites and print a JSON report");
  rx->add_option("-c,--config", rx_config, "JSON config")->check(CLI::ExistingFile);
  rx->add_option("-o,--out", rx_out, "also write the report to this file");
  rx->add_option("-s,--seed", rx_seed, "suite seed");
  rx->add_option("--trials", rx_trials, "scenarios per suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      gfra::ExperimentConfig cfg;
      if (!config_path.empty()) cfg = gfra::load_config(config_path);
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      if (run->count("--seed")) cfg.seeds = {seed};
      if (!figures.empty()) cfg.figures = split_list(figures);
      if (paper_literal) {
        cfg.lifetime_mode = gfra::LifetimeMode::PaperLiteral;
        cfg.base_law = gfra::BaseLaw::PaperLiteral;
      }
      if (!lifetime.empty()) cfg.lifetime_mode = gfra::parse_lifetime_mode(lifetime);
      if (!mixture.empty()) cfg.mixture = gfra::parse_mixture(mixture);
      if (!mrc.empty()) cfg.mrc_model = gfra::parse_mrc_model(mrc);
      if (!law.empty()) cfg.base_law = gfra::parse_base_law(law);
      if (reps > 0) cfg.reps = reps;
      if (packets > 0.0) cfg.packets_per_trial = packets;
      if (run->count("--threads")) cfg.threads = threads;
      if (config_path.empty()) gfra::finalize(cfg);
      const auto res = gfra::run_experiment(cfg);
      std::cout << "wrote " << cfg.output_dir << " (" << res.kpi_rows.size() << " KPI rows, "
                << res.reliability_rows.size() << " reliability rows, "
                << res.summary["divergent_rows"].get<std::size_t>() << " divergent)\n";
      return 0;
    }
    gfra::ExperimentConfig cfg;
    if (!rx_config.empty()) cfg = gfra::load_config(rx_config);
    else gfra::finalize(cfg);
    if (rx->count("--seed")) cfg.receiver.seed = rx_seed;
    if (rx_trials > 0) cfg.receiver.single_trials = cfg.receiver.two_packet_trials = rx_trials;
    const auto report = gfra::validate_receiver(cfg.system, cfg.receiver);
    const std::string text = gfra::to_json(report).dump(2);
    std::cout << text << '\n';
    if (!rx_out.empty()) {
      std::ofstream os(rx_out);
      if (!os) throw gfra::IoError("cannot write '" + rx_out + "'");
      os << text << '\n';
    }
    return report.pass() ? 0 : 3;
  } catch (const gfra::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
