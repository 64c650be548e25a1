#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "klgame/harness.hpp"

namespace klgame {

enum class Command { gen, fit, solve, selfplay, verify, sweep_n, sweep_t, report };

struct CliCommand {
  Command command = Command::verify;
  std::string config_path;  // empty = built-in defaults
  std::vector<std::pair<std::string, std::string>> overrides;  // --set key=value, in order
  std::optional<std::string> out_dir;
  std::optional<int> workers;
  std::optional<std::uint64_t> master_seed;
};

/// Loads the JSON config (strict: unknown keys and type mismatches are
/// errors), applies --set overrides in order, then the dedicated flags.
ExperimentConfig load_experiment_config(const CliCommand& cmd);

/// Executes one command. Exit codes: 0 success, 1 verification failure,
/// 2 configuration or I/O error (single-line diagnostic on stderr).
int run_command(const CliCommand& cmd);

}  // namespace klgame
