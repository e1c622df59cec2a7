#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "qsd/commands.hpp"
#include "qsd/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Sequential Monte Carlo sampler for limiting conditional distributions"};
  app.require_subcommand(1);

  std::string config_path;
  qsd::CommandOptions options;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string run_csv;
  std::string oracle_csv;
  double threshold = 0.0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
    cmd->add_option("--seed", seed, "master seed (overrides the config)");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--threads", options.threads, "worker threads for replications")->check(CLI::PositiveNumber);
  };
  auto* run = app.add_subcommand("run", "run the sampler and write CSV artifacts");
  auto* oracle = app.add_subcommand("oracle", "compute the exact reference distribution");
  auto* compare = app.add_subcommand("compare", "compare a run histogram with the oracle");
  auto* sweep = app.add_subcommand("sweep", "sweep lambda, t_max or beta");
  for (auto* cmd : {run, oracle, compare, sweep}) add_common(cmd);
  compare->add_option("--run", run_csv, "run histogram CSV (default: <out>/histogram.csv)");
  compare->add_option("--oracle", oracle_csv, "oracle CSV (default: <out>/oracle.csv)");
  compare->add_option("--threshold", threshold, "TV threshold (default: config compare.threshold)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : qsd::kExitConfig;
  }

  try {
    const auto config = qsd::load_config(config_path);
    for (auto* cmd : {run, oracle, compare, sweep}) {
      if (cmd->get_option("--seed")->count() > 0) options.seed = seed;
      if (cmd->get_option("--out")->count() > 0) options.out = out_dir;
    }
    if (compare->get_option("--run")->count() > 0) options.run_csv = run_csv;
    if (compare->get_option("--oracle")->count() > 0) options.oracle_csv = oracle_csv;
    if (compare->get_option("--threshold")->count() > 0) options.threshold = threshold;

    if (run->parsed()) return qsd::cmd_run(config, options, std::cout, std::cerr);
    if (oracle->parsed()) return qsd::cmd_oracle(config, options, std::cout, std::cerr);
    if (compare->parsed()) return qsd::cmd_compare(config, options, std::cout, std::cerr);
    return qsd::cmd_sweep(config, options, std::cout, std::cerr);
  } catch (const qsd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return qsd::kExitConfig;
  } catch (const qsd::UnsupportedOracle& e) {
    std::cerr << "{\"error\":\"UnsupportedOracle\",\"message\":\"" << e.what() << "\"}\n";
    return qsd::kExitConfig;
  } catch (const qsd::Error& e) {
    std::cerr << "{\"error\":\"" << e.kind() << "\",\"message\":\"" << e.what() << "\"}\n";
    return qsd::kExitSampler;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return qsd::kExitSampler;
  }
}
