#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "klgame/estimation.hpp"
#include "klgame/rng.hpp"
#include "klgame/solver.hpp"
#include "klgame/types.hpp"

namespace klgame {

struct SlackRecord {
  std::string label;
  Scalar violation = 0;  // positive means the labelled inequality failed
};

/// Outcome of one numerical verification. passed <=> max_violation <= tolerance.
struct BoundReport {
  std::string name;
  long instances_checked = 0;
  Scalar max_violation = -std::numeric_limits<Scalar>::infinity();
  bool passed = false;
  Scalar tolerance = 0;
  std::vector<SlackRecord> details;

  void record(Scalar violation) {
    ++instances_checked;
    if (violation > max_violation) max_violation = violation;
  }
  void record(const std::string& label, Scalar violation) {
    record(violation);
    details.push_back({label, violation});
  }
  BoundReport& finalize() {
    if (instances_checked == 0) max_violation = 0;
    passed = max_violation <= tolerance;
    return *this;
  }
};

/// Worst payoff-estimation error at context x averaged against one equilibrium
/// marginal: max of ||E_{a2~nash2}[dg(x,.,a2)]||_inf and ||E_{a1~nash1}[dg(x,a1,.)]||_inf.
Scalar unilateral_error(const PayoffTable& g_hat, const PayoffTable& g_true,
                        const JointPolicy& nash, Index x);

struct UnilateralError {
  Vector per_context;  // E(x) for every context
  Scalar mean_square;  // E_rho[E(x)^2]
};

UnilateralError unilateral_error_profile(const PayoffTable& g_hat, const PayoffTable& g_true,
                                         const JointPolicy& nash, const Vector& rho);

/// Strictly positive random policy (softmax of uniform logits in [-range, range]).
Policy random_policy(Index num_contexts, Index num_actions, Rng& rng, Scalar logit_range = 3.0);

/// KL(softmax(z) || softmax(z')) <= 0.5 * ||z - z'||_inf^2 on random logit pairs
/// (entries in [-5, 5], action counts 2..8).
BoundReport check_kl_logit_bound(long num_pairs, std::uint64_t seed);

/// Both closed-form identities
///   J(g, br1(pi2), pi2) - J(g, pi1, pi2) = eta^-1 E KL(pi1 || br1(pi2))
///   J(g, pi1, pi2) - J(g, pi1, br2(pi1)) = eta^-1 E KL(pi2 || br2(pi1))
/// on num_random random joint policies.
BoundReport check_br_suboptimality_identity(const PayoffTable& g, const GameConfig& cfg,
                                            const Vector& rho, long num_random,
                                            std::uint64_t seed, Scalar tolerance = 1e-9);

/// The two-sided gap decomposition around the equilibrium of g_true:
///   Gap1 = J(g,dagger,pi2) - J(g,pi1*,pi2)  ==  eta^-1 E KL(pi1* || br1(pi2))
///   Gap2 = J(g,pi1*,pi2) - J(g,pi*)         ==  eta^-1 E KL(pi2 || pi2*)
/// checked as equalities for any supplied pi_hat. When g_hat is supplied
/// (pi_hat must then be its equilibrium) the smoothness upper bounds
///   Gap1 <= (eta/2) E ||pi2 - pi2*||_1^2
///   Gap2 <= 2 eta E ||pi1 - pi1*||_1^2 + 2 eta E max_a2 (E_{a1~pi1*}[g_hat-g])^2
/// are asserted as well, with 4*tol_oracle additive slack.
BoundReport check_gap_kl_identities(const PayoffTable& g_true, const GameConfig& cfg,
                                    const Vector& rho, const JointPolicy& pi_hat,
                                    const PayoffTable* g_hat = nullptr,
                                    Scalar tol_oracle = 1e-12, Scalar tolerance = 1e-8);

/// Equilibrium stability under payoff perturbation:
///   || pi_hat_x - pi*_x ||_1 <= 2 eta E(x) + 4 tol_oracle  at every context,
/// with both equilibria computed by nash_oracle at tol_oracle.
BoundReport check_stability_bound(const PayoffTable& g_true, const PayoffTable& g_hat,
                                  const GameConfig& cfg, const Vector& rho, Scalar tol_oracle);

/// Last-iterate convergence envelope of the default schedule:
///   V_t <= 16 eta^2 / (t+1) for every recorded t >= 1.
/// The trace must carry anchor diagnostics.
BoundReport check_opt_convergence(const SelfPlayTrace& trace, Scalar eta, Scalar slack = 1e-10);

struct ConcentrationOptions {
  long n = 500;
  Scalar noise_sigma = 0.5;
  Scalar delta = 0.1;
  long trials = 500;
  std::uint64_t master_seed = 0;
};

/// Monte-Carlo frequency test of the in-sample error bound
///   sum_i (g_hat(z_i) - g_true(z_i))^2 <= 8 log(|cls|/delta),
/// which must fail in at most delta + 3 sqrt(delta(1-delta)/trials) of trials.
BoundReport check_insample_bound(const GameInstance& game, const FunctionClass& cls,
                                 const JointPolicy& behavior, const ConcentrationOptions& opts);

/// Pairwise generalization bound
///   E_mu[(g1-g2)^2] <= (2/n) sum_i (g1-g2)^2(z_i) + (80/3n) log(2|cls|/delta)
/// simultaneously over all pairs, plus the derived mean-squared-error envelope
///   E_mu[(g_hat-g_true)^2] <= 44 log(2|cls|/delta) / n,
/// both as Monte-Carlo frequency tests; median MSE must be non-increasing
/// along the n grid.
BoundReport check_generalization_bound(const GameInstance& game, const FunctionClass& cls,
                                       const JointPolicy& behavior,
                                       const std::vector<long>& n_grid,
                                       const ConcentrationOptions& opts);

struct SlopeFit {
  Scalar slope = 0;
  Scalar intercept = 0;
  Scalar r2 = 0;
};

/// Ordinary least squares on (x, y) pairs.
SlopeFit ols_fit(const std::vector<Scalar>& x, const std::vector<Scalar>& y);

/// Median of a copied, sorted sample (mean of the two middle order statistics
/// for even counts).
Scalar median(std::vector<Scalar> values);

struct CellResult {
  Scalar dual_gap = 0;
  Scalar payoff_mse = 0;
  std::size_t chosen_index = 0;
};

/// One run of the offline pipeline: sample, least-squares fit, solve the
/// fitted game, evaluate the duality gap under the true payoff.
CellResult run_minimax_cell(const GameInstance& game, const FunctionClass& cls,
                            const JointPolicy& behavior, const GameConfig& cfg, long n,
                            Scalar noise_sigma, std::uint64_t cell_seed, Scalar oracle_tol,
                            long oracle_max_iters);

/// Same pipeline with the lower-confidence comparator table in place of the
/// least-squares pick.
CellResult run_baseline_cell(const GameInstance& game, const FunctionClass& cls,
                             const JointPolicy& behavior, const GameConfig& cfg, long n,
                             Scalar noise_sigma, Scalar delta, std::uint64_t cell_seed,
                             Scalar oracle_tol, long oracle_max_iters);

struct SelfPlayCellResult {
  Scalar gap_hat = 0;     // duality gap of the fitted game's equilibrium
  Scalar payoff_mse = 0;  // MSE of the fitted table
  std::vector<Scalar> gap_at;  // DualGap(pi^(T)) at each grid T
  std::vector<Scalar> v_at;    // E_rho KL(pi_hat || pi^(T)) at each grid T
};

/// Offline self-play pipeline: fit once, run the default-schedule dynamics to
/// the largest grid T, snapshotting the gap and anchor divergence at each grid
/// point.
SelfPlayCellResult run_selfplay_cell(const GameInstance& game, const FunctionClass& cls,
                                     const JointPolicy& behavior, const GameConfig& cfg, long n,
                                     Scalar noise_sigma, std::uint64_t cell_seed,
                                     const std::vector<long>& t_grid, Scalar oracle_tol,
                                     long oracle_max_iters);

struct RateOptions {
  std::vector<long> n_grid;
  long num_seeds = 20;
  Scalar delta = 0.1;
  Scalar noise_sigma = 0.5;
  std::uint64_t master_seed = 0;
  Scalar envelope_constant = 64;
  Scalar slope_lo = -1.3;
  Scalar slope_hi = -0.7;
  Scalar r2_min = 0.9;
  Scalar oracle_tol = 1e-10;
  Scalar oracle_tol_truth = 1e-12;
  long oracle_max_iters = 1000000;
};

/// Report builder for the fast-rate claim: per-n median gap under the
/// envelope K (eta + eta^3) C_uni log(|cls|/delta) / n, fitted log-log slope
/// inside [slope_lo, slope_hi], r^2 at least r2_min.
BoundReport minimax_rate_report(const std::vector<long>& n_grid,
                                const std::vector<Scalar>& median_gap, Scalar c_uni, Scalar eta,
                                std::size_t class_size, const RateOptions& opts);

/// Report builder for the conservative-baseline contrast: baseline slope within
/// [slope_lo, slope_hi] (shallower than the fast rate) and baseline median gap
/// at least the pipeline median gap at every n.
BoundReport baseline_contrast_report(const std::vector<long>& n_grid,
                                     const std::vector<Scalar>& median_main,
                                     const std::vector<Scalar>& median_baseline, Scalar slope_lo,
                                     Scalar slope_hi);

/// Full sweep-and-assert form of the fast-rate check.
BoundReport check_minimax_rate(const GameInstance& game, const FunctionClass& cls,
                               const JointPolicy& behavior, const GameConfig& cfg,
                               const RateOptions& opts);

struct SelfPlayRateOptions {
  long n = 4096;
  std::vector<long> t_grid;
  long num_seeds = 20;
  Scalar delta = 0.1;
  Scalar noise_sigma = 0.5;
  std::uint64_t master_seed = 0;
  Scalar envelope_constant = 64;
  Scalar plateau_factor = 2.0;
  Scalar wiggle_factor = 1.10;  // permitted increase between consecutive medians
  Scalar oracle_tol = 1e-10;
  Scalar oracle_tol_truth = 1e-12;
  long oracle_max_iters = 1000000;
};

/// Report builder for the self-play rate claim: median gap under the envelope
/// K (eta + eta^3) (1/T + C_uni log(|cls|/delta)/n), near-monotone decrease in
/// T, and a plateau within plateau_factor of the fitted-equilibrium gap once
/// T >= n.
BoundReport selfplay_rate_report(const std::vector<long>& t_grid,
                                 const std::vector<Scalar>& median_gap, Scalar median_gap_hat,
                                 Scalar c_uni, Scalar eta, std::size_t class_size,
                                 const SelfPlayRateOptions& opts);

/// Full sweep-and-assert form of the self-play rate check.
BoundReport check_selfplay_rate(const GameInstance& game, const FunctionClass& cls,
                                const JointPolicy& behavior, const GameConfig& cfg,
                                const SelfPlayRateOptions& opts);

}  // namespace klgame
