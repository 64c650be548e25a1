#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "klgame/analysis.hpp"
#include "klgame/types.hpp"

namespace klgame {

/// Everything a sweep or verification run needs, with desk-scale defaults.
/// All randomness in a run derives from master_seed.
struct ExperimentConfig {
  Index num_contexts = 4;
  Index num_actions = 4;
  Scalar eta = 1.0;
  Scalar noise_sigma = 0.5;
  std::size_t class_size = 16;
  Scalar perturbation_scale = 0.28;
  std::string behavior_policy = "uniform";  // uniform | reference | skewed | custom
  Matrix behavior_custom_p1;                // used only when behavior_policy == "custom"
  Matrix behavior_custom_p2;
  std::vector<long> n_grid = {128, 256, 512, 1024, 2048, 4096, 8192, 16384};
  std::vector<long> t_grid = {1,   2,   4,    8,    16,   32,   64,   128,
                              256, 512, 1024, 2048, 4096, 8192, 16384};
  long num_seeds = 20;
  Scalar delta = 0.1;
  std::uint64_t master_seed = 57;
  long n_fixed = 4096;         // dataset size for sweep-t
  long dataset_n = 1024;       // dataset size for gen / fit / solve / selfplay
  long selfplay_iters = 10000; // T for the selfplay command
  Scalar oracle_tol = 1e-10;
  Scalar oracle_tol_truth = 1e-12;
  long oracle_max_iters = 1000000;
  int workers = 0;  // 0 = hardware concurrency
  bool baseline = true;
  bool record_timings = false;  // timings make output files non-reproducible
  std::string out_dir = "out";
};

void validate_experiment_config(const ExperimentConfig& config);

/// Payoff entries i.i.d. uniform on [-1, 1]; rho drawn flat-Dirichlet.
GameInstance random_game(Index num_contexts, Index num_actions, std::uint64_t seed);

/// Member 0 is g_true exactly (realizability); members 1..size-1 add smooth
/// random perturbations, clipped to [-1, 1], that are constant along one
/// opponent axis and whose amplitudes descend geometrically from
/// perturbation_scale. The ladder keeps the least-squares pick at the
/// resolution limit of every sample size in the default grid.
FunctionClass build_function_class(const PayoffTable& g_true, std::size_t size,
                                   Scalar perturbation_scale, std::uint64_t seed);

GameConfig make_game_config(const ExperimentConfig& config);
JointPolicy make_behavior_policy(const ExperimentConfig& config, const GameConfig& cfg);

/// The deterministic instance a config denotes: game, regularization,
/// hypothesis class, behavior policy.
struct InstanceBundle {
  GameInstance game;
  GameConfig cfg;
  FunctionClass cls;
  JointPolicy behavior;
};
InstanceBundle build_instance(const ExperimentConfig& config);

struct SweepRow {
  std::string method;  // minimax | baseline | selfplay
  long n = 0;
  std::optional<long> T;
  long seed_index = 0;
  std::optional<Scalar> dual_gap;
  std::optional<Scalar> payoff_mse;
  std::optional<Scalar> c_uni;
  std::optional<Scalar> v_t;  // selfplay rows; exported via plot data, not sweep.csv
  Scalar wall_time_ms = 0;
  std::string error;  // non-empty marks a failed cell (numeric fields emitted as nan)
};

/// Full offline pipeline per (n, seed) cell, plus baseline rows when enabled.
/// Cell seed = derive_seed(master_seed, {n, seed_index, hash_tag(method)}).
std::vector<SweepRow> sweep_n(const ExperimentConfig& config);

/// Fixed n = n_fixed, self-play gap at every T in t_grid, plus one minimax
/// reference row per seed.
std::vector<SweepRow> sweep_t(const ExperimentConfig& config);

/// OLS on (log2 x, log2 median-over-seeds value) for one method's rows.
/// value_column is dual_gap | payoff_mse | v_t; x_column is n | T. Requires at
/// least 4 grid points, all with positive medians.
SlopeFit fit_loglog_slope(const std::vector<SweepRow>& rows, const std::string& value_column,
                          const std::string& method, const std::string& x_column = "n");

std::string sweep_to_csv(const std::vector<SweepRow>& rows, bool record_timings);

/// Writes sweep.csv, bounds.json and plotdata_<method>.csv into out_dir.
/// Byte-identical for identical inputs.
void emit_report(const std::vector<SweepRow>& rows, const std::vector<BoundReport>& reports,
                 const std::filesystem::path& out_dir, bool record_timings = false);

/// Just the plotdata_<method>.csv files (log-log pairs of grid point and
/// median value), one data line per grid point with a positive median.
void emit_plotdata(const std::vector<SweepRow>& rows, const std::filesystem::path& out_dir);

/// Parses a sweep.csv produced by emit_report.
std::vector<SweepRow> parse_sweep_csv(const std::string& content);

/// Named, lazily-run stages of the verification suite. Each stage returns the
/// reports it produced; stages are independent and deterministic.
using SuiteStep = std::pair<std::string, std::function<std::vector<BoundReport>()>>;
std::vector<SuiteStep> verification_steps(const ExperimentConfig& config);

/// Runs one stage; an exception becomes a single failed report named
/// "<stage>_error" rather than aborting the suite.
std::vector<BoundReport> run_step_guarded(const std::string& name,
                                          const std::function<std::vector<BoundReport>()>& fn);

/// Runs every stage in order and concatenates the reports.
std::vector<BoundReport> run_verification_suite(const ExperimentConfig& config);

/// Runs fn(0..count-1) on a small thread pool; any worker exception is
/// rethrown. Results must be written to disjoint slots so the outcome is
/// independent of scheduling.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace klgame
