#include "klgame/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include <json.hpp>

#include "klgame/game.hpp"
#include "klgame/io.hpp"
#include "klgame/rng.hpp"

namespace klgame {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

Matrix matrix_from_json(const json& value, const std::string& key) {
  if (!value.is_array() || value.empty() || !value.front().is_array())
    throw std::invalid_argument("config: " + key + " must be an array of arrays");
  const std::size_t rows = value.size();
  const std::size_t cols = value.front().size();
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!value[r].is_array() || value[r].size() != cols)
      throw std::invalid_argument("config: " + key + " rows have unequal lengths");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!value[r][c].is_number())
        throw std::invalid_argument("config: " + key + " entries must be numbers");
      out(r, c) = value[r][c].get<Scalar>();
    }
  }
  return out;
}

std::vector<long> grid_from_json(const json& value, const std::string& key) {
  if (!value.is_array()) throw std::invalid_argument("config: " + key + " must be an array");
  std::vector<long> grid;
  for (const json& v : value) {
    if (!v.is_number_integer())
      throw std::invalid_argument("config: " + key + " entries must be integers");
    grid.push_back(v.get<long>());
  }
  return grid;
}

template <typename T>
T number_from_json(const json& value, const std::string& key) {
  if (!value.is_number()) throw std::invalid_argument("config: " + key + " must be a number");
  return value.get<T>();
}

long integer_from_json(const json& value, const std::string& key) {
  if (!value.is_number_integer())
    throw std::invalid_argument("config: " + key + " must be an integer");
  return value.get<long>();
}

void apply_key(ExperimentConfig& config, const std::string& key, const json& value) {
  if (key == "num_contexts") config.num_contexts = integer_from_json(value, key);
  else if (key == "num_actions") config.num_actions = integer_from_json(value, key);
  else if (key == "eta") config.eta = number_from_json<Scalar>(value, key);
  else if (key == "noise_sigma") config.noise_sigma = number_from_json<Scalar>(value, key);
  else if (key == "class_size") config.class_size = static_cast<std::size_t>(integer_from_json(value, key));
  else if (key == "perturbation_scale") config.perturbation_scale = number_from_json<Scalar>(value, key);
  else if (key == "behavior_policy") {
    if (value.is_string()) {
      config.behavior_policy = value.get<std::string>();
    } else if (value.is_object()) {
      for (const auto& [k, v] : value.items())
        if (k != "type" && k != "p1" && k != "p2")
          throw std::invalid_argument("config: unknown behavior_policy key '" + k + "'");
      if (!value.contains("type") || !value["type"].is_string())
        throw std::invalid_argument("config: behavior_policy.type must be a string");
      config.behavior_policy = value["type"].get<std::string>();
      if (config.behavior_policy == "custom") {
        if (!value.contains("p1") || !value.contains("p2"))
          throw std::invalid_argument("config: custom behavior_policy needs p1 and p2");
        config.behavior_custom_p1 = matrix_from_json(value["p1"], "behavior_policy.p1");
        config.behavior_custom_p2 = matrix_from_json(value["p2"], "behavior_policy.p2");
      }
    } else {
      throw std::invalid_argument("config: behavior_policy must be a string or object");
    }
  }
  else if (key == "n_grid") config.n_grid = grid_from_json(value, key);
  else if (key == "t_grid") config.t_grid = grid_from_json(value, key);
  else if (key == "num_seeds") config.num_seeds = integer_from_json(value, key);
  else if (key == "delta") config.delta = number_from_json<Scalar>(value, key);
  else if (key == "master_seed") {
    if (!value.is_number_integer() && !value.is_number_unsigned())
      throw std::invalid_argument("config: master_seed must be an integer");
    config.master_seed = value.get<std::uint64_t>();
  }
  else if (key == "n_fixed") config.n_fixed = integer_from_json(value, key);
  else if (key == "dataset_n") config.dataset_n = integer_from_json(value, key);
  else if (key == "selfplay_iters") config.selfplay_iters = integer_from_json(value, key);
  else if (key == "oracle_tol") config.oracle_tol = number_from_json<Scalar>(value, key);
  else if (key == "oracle_tol_truth") config.oracle_tol_truth = number_from_json<Scalar>(value, key);
  else if (key == "oracle_max_iters") config.oracle_max_iters = integer_from_json(value, key);
  else if (key == "workers") config.workers = static_cast<int>(integer_from_json(value, key));
  else if (key == "baseline") {
    if (!value.is_boolean()) throw std::invalid_argument("config: baseline must be a boolean");
    config.baseline = value.get<bool>();
  }
  else if (key == "record_timings") {
    if (!value.is_boolean()) throw std::invalid_argument("config: record_timings must be a boolean");
    config.record_timings = value.get<bool>();
  }
  else if (key == "out_dir") {
    if (!value.is_string()) throw std::invalid_argument("config: out_dir must be a string");
    config.out_dir = value.get<std::string>();
  }
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

}  // namespace

ExperimentConfig load_experiment_config(const CliCommand& cmd) {
  ExperimentConfig config;
  if (!cmd.config_path.empty()) {
    json doc;
    try {
      doc = json::parse(read_file(cmd.config_path));
    } catch (const json::parse_error& e) {
      throw std::invalid_argument("config: " + cmd.config_path + ": " + e.what());
    }
    if (!doc.is_object()) throw std::invalid_argument("config: top level must be an object");
    for (const auto& [key, value] : doc.items()) apply_key(config, key, value);
  }
  for (const auto& [key, raw] : cmd.overrides) {
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;  // unquoted strings like --set behavior_policy=skewed
    }
    apply_key(config, key, value);
  }
  if (cmd.out_dir) config.out_dir = *cmd.out_dir;
  if (cmd.workers) config.workers = *cmd.workers;
  if (cmd.master_seed) config.master_seed = *cmd.master_seed;
  validate_experiment_config(config);
  return config;
}

namespace {

json policy_to_json(const Policy& pi) {
  json rows = json::array();
  for (Index x = 0; x < pi.num_contexts(); ++x) {
    json row = json::array();
    for (Index a = 0; a < pi.num_actions(); ++a) row.push_back(pi.probs(x, a));
    rows.push_back(row);
  }
  return rows;
}

/// The dataset the config denotes: the canonical file when present, otherwise
/// sampled deterministically from the master seed.
OfflineDataset config_dataset(const ExperimentConfig& config, const InstanceBundle& bundle) {
  const fs::path path = fs::path(config.out_dir) / "dataset.csv";
  if (fs::exists(path))
    return read_dataset_csv(path, config.num_contexts, config.num_actions);
  const std::uint64_t seed =
      derive_seed(config.master_seed, {static_cast<std::uint64_t>(config.dataset_n), 0,
                                       hash_tag("dataset")});
  return sample_dataset(bundle.game, bundle.behavior, config.dataset_n, config.noise_sigma, seed);
}

int run_gen(const ExperimentConfig& config) {
  const InstanceBundle bundle = build_instance(config);
  const std::uint64_t seed =
      derive_seed(config.master_seed, {static_cast<std::uint64_t>(config.dataset_n), 0,
                                       hash_tag("dataset")});
  const OfflineDataset data = sample_dataset(bundle.game, bundle.behavior, config.dataset_n,
                                             config.noise_sigma, seed);
  const fs::path path = fs::path(config.out_dir) / "dataset.csv";
  write_dataset_csv(path, data);
  std::cout << "wrote " << path.string() << " (" << data.records.size() << " records)\n";
  return 0;
}

int run_fit(const ExperimentConfig& config) {
  const InstanceBundle bundle = build_instance(config);
  const OfflineDataset data = config_dataset(config, bundle);
  const FitResult fit = least_squares_fit(bundle.cls, data, &bundle.game.payoff);
  json out;
  out["chosen_index"] = fit.chosen_index;
  out["in_sample_sse"] = fit.in_sample_sse;
  out["residual_vs_truth_sse"] = *fit.residual_vs_truth_sse;
  const fs::path path = fs::path(config.out_dir) / "fit.json";
  atomic_write_file(path, out.dump(2) + "\n");
  std::cout << "wrote " << path.string() << " (chosen_index " << fit.chosen_index << ")\n";
  return 0;
}

int run_solve(const ExperimentConfig& config) {
  const InstanceBundle bundle = build_instance(config);
  const OfflineDataset data = config_dataset(config, bundle);
  const FitResult fit = least_squares_fit(bundle.cls, data);
  const PayoffTable& g_hat = bundle.cls.members[fit.chosen_index];
  const JointPolicy pi = nash_oracle(g_hat, bundle.cfg, config.oracle_tol, config.oracle_max_iters);
  json out;
  out["eta"] = config.eta;
  out["chosen_index"] = fit.chosen_index;
  out["residual"] = fixed_point_residual(g_hat, pi, bundle.cfg);
  out["dual_gap_vs_truth"] = duality_gap(bundle.game.payoff, pi, bundle.cfg, bundle.game.rho);
  out["pi1"] = policy_to_json(pi.p1);
  out["pi2"] = policy_to_json(pi.p2);
  const fs::path path = fs::path(config.out_dir) / "policy.json";
  atomic_write_file(path, out.dump(2) + "\n");
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

int run_selfplay(const ExperimentConfig& config) {
  const InstanceBundle bundle = build_instance(config);
  const OfflineDataset data = config_dataset(config, bundle);
  const FitResult fit = least_squares_fit(bundle.cls, data);
  const PayoffTable& g_hat = bundle.cls.members[fit.chosen_index];
  const JointPolicy anchor =
      nash_oracle(g_hat, bundle.cfg, config.oracle_tol, config.oracle_max_iters);
  SelfPlayOptions options;
  options.anchor = &anchor;
  options.residual_every = 50;
  const auto [final_pi, trace] =
      selfplay_run(g_hat, bundle.cfg, bundle.game.rho, config.selfplay_iters, options);
  atomic_write_file(fs::path(config.out_dir) / "trace.csv", trace_to_csv(trace));
  json out;
  out["eta"] = config.eta;
  out["chosen_index"] = fit.chosen_index;
  out["iterations"] = config.selfplay_iters;
  out["residual"] = fixed_point_residual(g_hat, final_pi, bundle.cfg);
  out["dual_gap_vs_truth"] =
      duality_gap(bundle.game.payoff, final_pi, bundle.cfg, bundle.game.rho);
  out["pi1"] = policy_to_json(final_pi.p1);
  out["pi2"] = policy_to_json(final_pi.p2);
  atomic_write_file(fs::path(config.out_dir) / "policy.json", out.dump(2) + "\n");
  std::cout << "wrote " << (fs::path(config.out_dir) / "trace.csv").string() << " and policy.json\n";
  return 0;
}

int run_verify(const ExperimentConfig& config) {
  std::vector<BoundReport> reports;
  for (auto& [step_name, fn] : verification_steps(config)) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<BoundReport> produced = run_step_guarded(step_name, fn);
    const Scalar seconds =
        std::chrono::duration<Scalar>(std::chrono::steady_clock::now() - start).count();
    for (const BoundReport& report : produced) {
      std::printf("[%s] %-32s max_violation=%.3e tolerance=%.3e instances=%ld (%.1fs)\n",
                  report.passed ? "PASS" : "FAIL", report.name.c_str(), report.max_violation,
                  report.tolerance, report.instances_checked, seconds);
      std::fflush(stdout);
    }
    reports.insert(reports.end(), produced.begin(), produced.end());
  }
  atomic_write_file(fs::path(config.out_dir) / "bounds.json", bounds_to_json(reports));
  for (const BoundReport& report : reports)
    if (!report.passed) return 1;
  return 0;
}

void print_slopes(const std::vector<SweepRow>& rows) {
  std::vector<std::string> methods;
  for (const SweepRow& row : rows)
    if (std::find(methods.begin(), methods.end(), row.method) == methods.end())
      methods.push_back(row.method);
  std::sort(methods.begin(), methods.end());
  for (const std::string& method : methods) {
    bool has_t = false;
    for (const SweepRow& row : rows)
      if (row.method == method && row.T) has_t = true;
    try {
      const SlopeFit fit = fit_loglog_slope(rows, "dual_gap", method, has_t ? "T" : "n");
      std::printf("method=%s slope=%.4f intercept=%.4f r2=%.4f\n", method.c_str(), fit.slope,
                  fit.intercept, fit.r2);
    } catch (const std::exception& e) {
      std::printf("method=%s slope unavailable (%s)\n", method.c_str(), e.what());
    }
  }
}

int run_sweep(const ExperimentConfig& config, bool over_n) {
  const std::vector<SweepRow> rows = over_n ? sweep_n(config) : sweep_t(config);
  emit_report(rows, {}, config.out_dir, config.record_timings);
  std::cout << "wrote " << (fs::path(config.out_dir) / "sweep.csv").string() << " (" << rows.size()
            << " rows)\n";
  print_slopes(rows);
  return 0;
}

int run_report(const ExperimentConfig& config) {
  const fs::path path = fs::path(config.out_dir) / "sweep.csv";
  const std::vector<SweepRow> rows = parse_sweep_csv(read_file(path));
  emit_plotdata(rows, config.out_dir);
  print_slopes(rows);
  return 0;
}

}  // namespace

int run_command(const CliCommand& cmd) {
  try {
    const ExperimentConfig config = load_experiment_config(cmd);
    switch (cmd.command) {
      case Command::gen: return run_gen(config);
      case Command::fit: return run_fit(config);
      case Command::solve: return run_solve(config);
      case Command::selfplay: return run_selfplay(config);
      case Command::verify: return run_verify(config);
      case Command::sweep_n: return run_sweep(config, true);
      case Command::sweep_t: return run_sweep(config, false);
      case Command::report: return run_report(config);
    }
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace klgame
