#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "afm/harness.hpp"
#include "afm/verify.hpp"

namespace {

afm::RunConfig load_config(const std::string& path, const std::string& out_dir,
                           std::optional<std::uint64_t> seed) {
  afm::RunConfig config = afm::load_run_config(path);
  if (!out_dir.empty()) config.output_dir = out_dir;
  if (seed) config.master_seed = *seed;
  return config;
}

void report(const afm::RunResult& result) {
  if (result.records.empty()) {
    std::printf("no rounds executed (oracle calls: %ld)\n", result.oracle_calls);
    return;
  }
  const afm::MetricsSummary summary = afm::metrics(result.records);
  std::printf("rounds: %zu  oracle calls: %ld\n", result.records.size(),
              result.oracle_calls);
  std::printf("final best y: %.6g  final regret: %.6g\n", summary.final_best,
              summary.final_regret);
  if (summary.rounds_to_optimum >= 0)
    std::printf("optimum reached at round %d\n", summary.rounds_to_optimum);
  else
    std::printf("optimum not reached\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active flow matching over discrete sequence landscapes"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool quiet = false;

  CLI::App* cmd_run = app.add_subcommand("run", "Execute the active generation loop");
  cmd_run->add_option("-c,--config", config_path, "Config file")->required();
  cmd_run->add_option("-o,--out", out_dir, "Output directory (overrides config)");
  cmd_run->add_option("-s,--seed", seed, "Master seed override");
  cmd_run->add_flag("-q,--quiet", quiet, "Suppress warnings");

  CLI::App* cmd_baseline =
      app.add_subcommand("baseline", "Uniform-random control arm of the loop");
  cmd_baseline->add_option("-c,--config", config_path, "Config file")->required();
  cmd_baseline->add_option("-o,--out", out_dir, "Output directory (overrides config)");
  cmd_baseline->add_option("-s,--seed", seed, "Master seed override");
  cmd_baseline->add_flag("-q,--quiet", quiet, "Suppress warnings");

  CLI::App* cmd_verify =
      app.add_subcommand("verify", "Run the exact-oracle check suite");

  std::string run_dir;
  std::string plot_out;
  CLI::App* cmd_plot =
      app.add_subcommand("plotdata", "Re-emit regret curves from a run directory");
  cmd_plot->add_option("-r,--run", run_dir, "Run output directory")->required();
  cmd_plot->add_option("-o,--out", plot_out, "Destination CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    afm::set_log_enabled(!quiet);
    if (cmd_run->parsed()) {
      report(afm::run(load_config(config_path, out_dir, seed)));
      return 0;
    }
    if (cmd_baseline->parsed()) {
      report(afm::baseline_random(load_config(config_path, out_dir, seed)));
      return 0;
    }
    if (cmd_verify->parsed()) {
      const bool ok = afm::print_check_table(afm::verify_suite());
      return ok ? 0 : 3;
    }
    if (cmd_plot->parsed()) {
      std::ifstream in(run_dir + "/rounds.csv");
      if (!in) throw afm::ConfigError("cannot open " + run_dir + "/rounds.csv");
      std::ostringstream text;
      text << in.rdbuf();
      const std::string csv = afm::plotdata_csv(text.str());
      if (plot_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream out(plot_out);
        if (!out) throw afm::ConfigError("cannot open " + plot_out);
        out << csv;
      }
      return 0;
    }
  } catch (const afm::ConfigError& error) {
    std::cerr << "config error: " << error.what() << '\n';
    return 1;
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << '\n';
    return 2;
  }
  return 0;
}
