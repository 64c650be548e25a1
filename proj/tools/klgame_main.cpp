#include <CLI11.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "klgame/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Offline learning and numerical verification for KL-regularized zero-sum games"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::vector<std::string> sets;
  int workers = -1;
  std::uint64_t master_seed = 0;
  bool seed_given = false;
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--out", out_dir, "output directory (overrides config out_dir)");
  app.add_option("--set", sets, "config override key=value (repeatable)")->type_size(1);
  app.add_option("--workers", workers, "worker threads (0 = all processors)");
  app.add_option("--master-seed", master_seed, "root seed for all randomness")
      ->each([&](const std::string&) { seed_given = true; });

  long gen_n = -1;
  auto* gen = app.add_subcommand("gen", "sample an offline dataset to dataset.csv");
  gen->add_option("--n", gen_n, "number of records (overrides dataset_n)");
  auto* fit = app.add_subcommand("fit", "least-squares fit over the function class");
  auto* solve = app.add_subcommand("solve", "equilibrium of the fitted game");
  auto* selfplay = app.add_subcommand("selfplay", "self-play run on the fitted game");
  auto* verify = app.add_subcommand("verify", "run the full verification suite");
  auto* sweep_n_cmd = app.add_subcommand("sweep-n", "dual gap vs dataset size");
  auto* sweep_t_cmd = app.add_subcommand("sweep-t", "dual gap vs self-play iterations");
  auto* report = app.add_subcommand("report", "plot data and slopes from sweep.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  klgame::CliCommand cmd;
  if (gen->parsed()) cmd.command = klgame::Command::gen;
  else if (fit->parsed()) cmd.command = klgame::Command::fit;
  else if (solve->parsed()) cmd.command = klgame::Command::solve;
  else if (selfplay->parsed()) cmd.command = klgame::Command::selfplay;
  else if (verify->parsed()) cmd.command = klgame::Command::verify;
  else if (sweep_n_cmd->parsed()) cmd.command = klgame::Command::sweep_n;
  else if (sweep_t_cmd->parsed()) cmd.command = klgame::Command::sweep_t;
  else if (report->parsed()) cmd.command = klgame::Command::report;

  cmd.config_path = config_path;
  for (const std::string& kv : sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
      return 2;
    }
    cmd.overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (gen_n >= 0) cmd.overrides.emplace_back("dataset_n", std::to_string(gen_n));
  if (!out_dir.empty()) cmd.out_dir = out_dir;
  if (workers >= 0) cmd.workers = workers;
  if (seed_given) cmd.master_seed = master_seed;

  return klgame::run_command(cmd);
}
