#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "klgame/analysis.hpp"
#include "klgame/harness.hpp"
#include "test_util.hpp"

using namespace klgame;
using namespace klgame::testing;

TEST_CASE("unilateral error") {
  const Index nx = 2, na = 3;
  const GameInstance game = constant_game(0.2, nx, na);
  Rng prng(1);
  const JointPolicy nash{random_policy(nx, na, prng), random_policy(nx, na, prng)};

  CHECK(unilateral_error(game.payoff, game.payoff, nash, 0) == 0.0);

  PayoffTable shifted = game.payoff;
  for (Matrix& gx : shifted) gx.array() += 0.3;  // stays inside [-1, 1]
  CHECK(unilateral_error(shifted, game.payoff, nash, 0) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(unilateral_error(shifted, game.payoff, nash, 1) == doctest::Approx(0.3).epsilon(1e-14));

  // A single perturbed entry survives one marginal average per player.
  PayoffTable spiked = game.payoff;
  const Scalar d = 0.4;
  spiked[0](1, 2) += d;
  const Scalar expected = d * std::max(nash.p1.probs(0, 1), nash.p2.probs(0, 2));
  CHECK(unilateral_error(spiked, game.payoff, nash, 0) == doctest::Approx(expected).epsilon(1e-13));

  const UnilateralError profile = unilateral_error_profile(spiked, game.payoff, nash, game.rho);
  CHECK(profile.per_context[0] == doctest::Approx(expected).epsilon(1e-13));
  CHECK(profile.per_context[1] == 0.0);
  CHECK(profile.mean_square ==
        doctest::Approx(game.rho[0] * expected * expected).epsilon(1e-13));
}

TEST_CASE("stability bound check") {
  const GameInstance game = random_game(3, 4, 2);
  const GameConfig cfg = GameConfig::uniform(1.0, 3, 4);

  // Identical tables: both sides vanish up to oracle slack.
  CHECK(check_stability_bound(game.payoff, game.payoff, cfg, game.rho, 1e-12).passed);

  // Constant shift moves no equilibrium (softmax shift invariance per player).
  PayoffTable shifted = game.payoff;
  for (Matrix& gx : shifted) gx = (gx.array() + 0.2).cwiseMin(1.0).cwiseMax(-1.0).matrix();
  CHECK(check_stability_bound(game.payoff, shifted, cfg, game.rho, 1e-12).passed);

  // Random perturbation pairs across eta values.
  const Scalar etas[3] = {0.5, 1.0, 2.0};
  for (int i = 0; i < 9; ++i) {
    const Index nx = 1 + (i % 4), na = 2 + (i % 4);
    const GameInstance g = random_game(nx, na, 100 + i);
    const GameConfig c = GameConfig::uniform(etas[i % 3], nx, na);
    const FunctionClass perturbed = build_function_class(g.payoff, 2, 0.25, 200 + i);
    const BoundReport report =
        check_stability_bound(g.payoff, perturbed.members[1], c, g.rho, 1e-12);
    CHECK(report.passed);
    CHECK(report.instances_checked == nx);
  }
}

TEST_CASE("br suboptimality identity check and worked example") {
  const GameInstance mp = matching_pennies();
  const GameConfig cfg = GameConfig::uniform(1.0, 1, 2);
  const BoundReport report = check_br_suboptimality_identity(mp.payoff, cfg, mp.rho, 50, 3);
  CHECK(report.passed);
  CHECK(report.instances_checked == 100);
  CHECK(report.max_violation <= 1e-9);

  // pi1 uniform, pi2 = [0.7, 0.3]: the player-2 headroom equals
  // KL([0.7, 0.3] || uniform).
  const JointPolicy pi{cfg.ref1, policy_from_rows({{0.7, 0.3}})};
  const Scalar lhs = objective(mp.payoff, pi, cfg, mp.rho) -
                     best_response_value(mp.payoff, pi, 2, cfg, mp.rho);
  CHECK(lhs == doctest::Approx(0.082282878505051782).epsilon(1e-12));
}

TEST_CASE("gap decomposition identities") {
  const GameInstance game = random_game(3, 4, 4);
  const GameConfig cfg = GameConfig::uniform(1.0, 3, 4);
  const JointPolicy star = nash_oracle(game.payoff, cfg, 1e-12);

  // At the equilibrium both gaps vanish.
  BoundReport at_star = check_gap_kl_identities(game.payoff, cfg, game.rho, star);
  CHECK(at_star.passed);
  CHECK(best_response_value(game.payoff, star, 1, cfg, game.rho) -
            objective(game.payoff, star, cfg, game.rho) <=
        1e-10);

  // Both gap terms depend only on the second component.
  Rng prng(5);
  const JointPolicy mixed{random_policy(3, 4, prng), star.p2};
  const Scalar gap1 = best_response_value(game.payoff, mixed, 1, cfg, game.rho) -
                      objective(game.payoff, {star.p1, mixed.p2}, cfg, game.rho);
  const Scalar gap2 = objective(game.payoff, {star.p1, mixed.p2}, cfg, game.rho) -
                      objective(game.payoff, star, cfg, game.rho);
  CHECK(std::abs(gap1) <= 1e-9);
  CHECK(std::abs(gap2) <= 1e-9);

  // Random perturbed equilibria: identities and smoothness bounds.
  const Scalar etas[3] = {0.5, 1.0, 2.0};
  for (int i = 0; i < 9; ++i) {
    const Index nx = 1 + (i % 3), na = 2 + (i % 4);
    const GameInstance g = random_game(nx, na, 300 + i);
    const GameConfig c = GameConfig::uniform(etas[i % 3], nx, na);
    const FunctionClass perturbed = build_function_class(g.payoff, 2, 0.3, 400 + i);
    const JointPolicy pi_hat = nash_oracle(perturbed.members[1], c, 1e-12);
    const BoundReport report =
        check_gap_kl_identities(g.payoff, c, g.rho, pi_hat, &perturbed.members[1], 1e-12);
    CHECK(report.passed);
  }
}

TEST_CASE("optimization convergence check") {
  const GameInstance constant = constant_game(0.25, 2, 3);
  const GameConfig cfg = GameConfig::uniform(1.0, 2, 3);
  const JointPolicy refs{cfg.ref1, cfg.ref2};
  SelfPlayOptions options;
  options.anchor = &refs;  // the equilibrium of a constant game is the reference pair
  auto [pi, trace] = selfplay_run(constant.payoff, cfg, constant.rho, 200, options);
  const BoundReport report = check_opt_convergence(trace, cfg.eta);
  CHECK(report.passed);
  CHECK(report.max_violation <= 0.0);

  auto [pi2, bare] = selfplay_run(constant.payoff, cfg, constant.rho, 10);
  CHECK_THROWS_AS(check_opt_convergence(bare, cfg.eta), std::invalid_argument);
}

TEST_CASE("in-sample and generalization concentration checks") {
  const GameInstance game = random_game(3, 3, 6);
  const FunctionClass cls = build_function_class(game.payoff, 6, 0.3, 7);
  const JointPolicy behavior{Policy::uniform(3, 3), Policy::uniform(3, 3)};
  ConcentrationOptions opts;
  opts.n = 200;
  opts.trials = 60;
  opts.master_seed = 8;
  const BoundReport insample = check_insample_bound(game, cls, behavior, opts);
  CHECK(insample.passed);
  CHECK(insample.instances_checked == 60);

  const BoundReport gen = check_generalization_bound(game, cls, behavior, {100, 200}, opts);
  CHECK(gen.passed);

  FunctionClass unrealizable;
  unrealizable.members.push_back(build_function_class(game.payoff, 2, 0.2, 9).members[1]);
  CHECK_THROWS_AS(check_insample_bound(game, unrealizable, behavior, opts),
                  std::invalid_argument);
}

TEST_CASE("ols fit and median") {
  std::vector<Scalar> x, y;
  for (long n : {128, 256, 512, 1024}) {
    x.push_back(std::log2(static_cast<Scalar>(n)));
    y.push_back(std::log2(4.0 / static_cast<Scalar>(n)));
  }
  const SlopeFit fit = ols_fit(x, y);
  CHECK(fit.slope == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK_THROWS_AS(median({}), std::invalid_argument);
}

TEST_CASE("noiseless pipeline cell recovers the truth") {
  const GameInstance game = random_game(4, 4, 11);
  const FunctionClass cls = build_function_class(game.payoff, 8, 0.3, 12);
  const JointPolicy behavior{Policy::uniform(4, 4), Policy::uniform(4, 4)};
  const GameConfig cfg = GameConfig::uniform(1.0, 4, 4);
  const CellResult cell =
      run_minimax_cell(game, cls, behavior, cfg, 128, 0.0, 13, 1e-10, 1000000);
  CHECK(cell.chosen_index == 0);
  CHECK(cell.payoff_mse == 0.0);
  CHECK(cell.dual_gap <= 1e-8);
}

TEST_CASE("selfplay cell converges toward the fitted equilibrium gap") {
  const GameInstance game = random_game(3, 3, 14);
  const FunctionClass cls = build_function_class(game.payoff, 8, 0.3, 15);
  const JointPolicy behavior{Policy::uniform(3, 3), Policy::uniform(3, 3)};
  const GameConfig cfg = GameConfig::uniform(1.0, 3, 3);
  const std::vector<long> t_grid = {0, 1, 16, 256, 4096};
  const SelfPlayCellResult cell =
      run_selfplay_cell(game, cls, behavior, cfg, 512, 0.5, 16, t_grid, 1e-10, 1000000);
  REQUIRE(cell.gap_at.size() == t_grid.size());
  // T = 0 is the reference pair.
  const JointPolicy refs{cfg.ref1, cfg.ref2};
  CHECK(cell.gap_at[0] ==
        doctest::Approx(duality_gap(game.payoff, refs, cfg, game.rho)).epsilon(1e-12));
  // The final iterate is near the fitted equilibrium.
  CHECK(std::abs(cell.gap_at.back() - cell.gap_hat) <= 0.5 * cell.gap_at.front() + 1e-3);
  CHECK(cell.v_at.back() <= 16.0 / 4097.0 + 1e-10);
}

TEST_CASE("verifiers are deterministic given instance and seed") {
  const GameInstance game = random_game(3, 3, 21);
  const GameConfig cfg = GameConfig::uniform(1.0, 3, 3);
  const BoundReport a = check_br_suboptimality_identity(game.payoff, cfg, game.rho, 20, 9);
  const BoundReport b = check_br_suboptimality_identity(game.payoff, cfg, game.rho, 20, 9);
  CHECK(a.max_violation == b.max_violation);
  CHECK(check_kl_logit_bound(500, 17).max_violation ==
        check_kl_logit_bound(500, 17).max_violation);
}

TEST_CASE("averaged squared policy distance is bounded by the unilateral error") {
  // E_x ||pi_hat - pi*||_1^2 <= 4 eta^2 E_x[E(x)^2], the context-wise stability
  // bound squared and averaged.
  const Scalar etas[3] = {0.5, 1.0, 2.0};
  for (int i = 0; i < 9; ++i) {
    const Index nx = 1 + (i % 4), na = 2 + (i % 4);
    const GameInstance game = random_game(nx, na, 600 + i);
    const GameConfig cfg = GameConfig::uniform(etas[i % 3], nx, na);
    const FunctionClass perturbed = build_function_class(game.payoff, 2, 0.3, 700 + i);
    const PayoffTable& g_hat = perturbed.members[1];
    const JointPolicy star = nash_oracle(game.payoff, cfg, 1e-12);
    const JointPolicy hat = nash_oracle(g_hat, cfg, 1e-12);
    Scalar lhs = 0;
    for (Index x = 0; x < nx; ++x) {
      const Scalar d = joint_l1_distance(hat, star, x);
      lhs += game.rho[x] * d * d;
    }
    const UnilateralError err = unilateral_error_profile(g_hat, game.payoff, star, game.rho);
    CHECK(lhs <= 4.0 * cfg.eta * cfg.eta * err.mean_square + 1e-10);
  }
}

TEST_CASE("singleton class makes the pipeline exact at every n") {
  const GameInstance game = random_game(4, 4, 22);
  FunctionClass cls;
  cls.members.push_back(game.payoff);
  const JointPolicy behavior{Policy::uniform(4, 4), Policy::uniform(4, 4)};
  const GameConfig cfg = GameConfig::uniform(1.0, 4, 4);
  for (long n : {128L, 1024L}) {
    const CellResult cell =
        run_minimax_cell(game, cls, behavior, cfg, n, 0.5, 23, 1e-10, 1000000);
    CHECK(cell.dual_gap <= 1e-8);
  }
}

TEST_CASE("rate report builders") {
  RateOptions opts;
  opts.n_grid = {128, 256, 512, 1024, 2048};
  std::vector<Scalar> clean;
  for (long n : opts.n_grid) clean.push_back(30.0 / static_cast<Scalar>(n));
  BoundReport good = minimax_rate_report(opts.n_grid, clean, 2.0, 1.0, 16, opts);
  CHECK(good.passed);

  std::vector<Scalar> slow;  // ~ n^-0.5: outside the fast-rate window
  for (long n : opts.n_grid) slow.push_back(3.0 / std::sqrt(static_cast<Scalar>(n)));
  BoundReport bad = minimax_rate_report(opts.n_grid, slow, 2.0, 1.0, 16, opts);
  CHECK_FALSE(bad.passed);

  // Baseline contrast: slow baseline dominates the fast pipeline.
  BoundReport contrast = baseline_contrast_report(opts.n_grid, clean, slow, -0.75, -0.3);
  CHECK(contrast.passed);
  BoundReport inverted = baseline_contrast_report(opts.n_grid, slow, clean, -0.75, -0.3);
  CHECK_FALSE(inverted.passed);
}

TEST_CASE("full rate checks pass on the default instance") {
  const ExperimentConfig config;
  const InstanceBundle bundle = build_instance(config);

  RateOptions opts;
  opts.n_grid = config.n_grid;
  opts.num_seeds = config.num_seeds;
  opts.master_seed = config.master_seed;
  const BoundReport fast = check_minimax_rate(bundle.game, bundle.cls, bundle.behavior,
                                              bundle.cfg, opts);
  CHECK(fast.passed);

  SelfPlayRateOptions sp;
  sp.n = config.n_fixed;
  sp.t_grid = config.t_grid;
  sp.num_seeds = config.num_seeds;
  sp.master_seed = config.master_seed;
  const BoundReport rate = check_selfplay_rate(bundle.game, bundle.cls, bundle.behavior,
                                               bundle.cfg, sp);
  CHECK(rate.passed);
}

TEST_CASE("selfplay rate report builder") {
  SelfPlayRateOptions opts;
  opts.n = 64;
  opts.t_grid = {1, 4, 16, 64, 256};
  const Scalar floor = 0.05;  // above 1/n, so the plateau criterion is satisfiable at T = n
  std::vector<Scalar> medians;
  for (long t : opts.t_grid) medians.push_back(floor + 1.0 / static_cast<Scalar>(t));
  BoundReport good = selfplay_rate_report(opts.t_grid, medians, floor, 2.0, 1.0, 16, opts);
  CHECK(good.passed);

  std::vector<Scalar> rising = medians;
  rising.back() = rising.front() * 2;  // violates the near-monotone decrease
  BoundReport bad = selfplay_rate_report(opts.t_grid, rising, floor, 2.0, 1.0, 16, opts);
  CHECK_FALSE(bad.passed);
}
