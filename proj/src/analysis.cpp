#include "klgame/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "klgame/game.hpp"

namespace klgame {

namespace {

std::string fmt(Scalar v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

bool tables_equal(const PayoffTable& a, const PayoffTable& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t x = 0; x < a.size(); ++x)
    if (a[x].rows() != b[x].rows() || a[x].cols() != b[x].cols() || (a[x].array() != b[x].array()).any())
      return false;
  return true;
}

Scalar mc_frequency_threshold(Scalar delta, long trials) {
  return delta + 3.0 * std::sqrt(delta * (1.0 - delta) / static_cast<Scalar>(trials));
}

}  // namespace

Scalar unilateral_error(const PayoffTable& g_hat, const PayoffTable& g_true,
                        const JointPolicy& nash, Index x) {
  if (g_hat.size() != g_true.size()) throw std::invalid_argument("unilateral_error: table mismatch");
  const Matrix diff = g_hat[x] - g_true[x];
  if (diff.rows() != nash.p1.num_actions() || diff.cols() != nash.p2.num_actions())
    throw std::invalid_argument("unilateral_error: shape mismatch");
  const Scalar vs_p2 = (diff * nash.p2.probs.row(x).transpose()).cwiseAbs().maxCoeff();
  const Scalar vs_p1 = (diff.transpose() * nash.p1.probs.row(x).transpose()).cwiseAbs().maxCoeff();
  return std::max(vs_p2, vs_p1);
}

UnilateralError unilateral_error_profile(const PayoffTable& g_hat, const PayoffTable& g_true,
                                         const JointPolicy& nash, const Vector& rho) {
  UnilateralError out;
  out.per_context.resize(rho.size());
  out.mean_square = 0;
  for (Index x = 0; x < rho.size(); ++x) {
    out.per_context[x] = unilateral_error(g_hat, g_true, nash, x);
    out.mean_square += rho[x] * out.per_context[x] * out.per_context[x];
  }
  return out;
}

Policy random_policy(Index num_contexts, Index num_actions, Rng& rng, Scalar logit_range) {
  Policy pi;
  pi.probs.resize(num_contexts, num_actions);
  Vector logits(num_actions);
  for (Index x = 0; x < num_contexts; ++x) {
    for (Index a = 0; a < num_actions; ++a) logits[a] = rng.uniform_in(-logit_range, logit_range);
    pi.probs.row(x) = softmax(logits).transpose();
  }
  return pi;
}

BoundReport check_kl_logit_bound(long num_pairs, std::uint64_t seed) {
  BoundReport report;
  report.name = "kl_logit_bound";
  report.tolerance = 0;
  Rng rng(seed);
  for (long i = 0; i < num_pairs; ++i) {
    const Index na = 2 + static_cast<Index>(rng.uniform() * 7);  // 2..8
    Vector z(na), zp(na);
    for (Index a = 0; a < na; ++a) {
      z[a] = rng.uniform_in(-5.0, 5.0);
      zp[a] = rng.uniform_in(-5.0, 5.0);
    }
    const Scalar kl = kl_divergence(softmax(z), softmax(zp));
    const Scalar bound = 0.5 * (z - zp).cwiseAbs().maxCoeff() * (z - zp).cwiseAbs().maxCoeff();
    report.record(kl - bound);
  }
  return report.finalize();
}

BoundReport check_br_suboptimality_identity(const PayoffTable& g, const GameConfig& cfg,
                                            const Vector& rho, long num_random,
                                            std::uint64_t seed, Scalar tolerance) {
  BoundReport report;
  report.name = "br_suboptimality_identity";
  report.tolerance = tolerance;
  Rng rng(seed);
  const Index nx = cfg.ref1.num_contexts();
  const Index na = cfg.ref1.num_actions();
  const Scalar inv_eta = 1.0 / cfg.eta;

  for (long i = 0; i < num_random; ++i) {
    const JointPolicy pi{random_policy(nx, na, rng), random_policy(nx, na, rng)};
    const Scalar base = objective(g, pi, cfg, rho);

    const Policy br1 = best_response_policy(g, pi.p2, 1, cfg);
    Scalar lhs = objective(g, {br1, pi.p2}, cfg, rho) - base;
    Scalar rhs = 0;
    for (Index x = 0; x < nx; ++x)
      rhs += rho[x] * inv_eta * kl_divergence(pi.p1.probs.row(x), br1.probs.row(x));
    report.record(std::abs(lhs - rhs));

    const Policy br2 = best_response_policy(g, pi.p1, 2, cfg);
    lhs = base - objective(g, {pi.p1, br2}, cfg, rho);
    rhs = 0;
    for (Index x = 0; x < nx; ++x)
      rhs += rho[x] * inv_eta * kl_divergence(pi.p2.probs.row(x), br2.probs.row(x));
    report.record(std::abs(lhs - rhs));
  }
  return report.finalize();
}

BoundReport check_gap_kl_identities(const PayoffTable& g_true, const GameConfig& cfg,
                                    const Vector& rho, const JointPolicy& pi_hat,
                                    const PayoffTable* g_hat, Scalar tol_oracle,
                                    Scalar tolerance) {
  BoundReport report;
  report.name = "gap_kl_identities";
  report.tolerance = tolerance;
  const Index nx = rho.size();
  const Scalar inv_eta = 1.0 / cfg.eta;

  const JointPolicy star = nash_oracle(g_true, cfg, tol_oracle);

  // Gap1: player 1's headroom against pi_hat's second component.
  const Scalar gap1_j = best_response_value(g_true, pi_hat, 1, cfg, rho) -
                        objective(g_true, {star.p1, pi_hat.p2}, cfg, rho);
  const Policy br1 = best_response_policy(g_true, pi_hat.p2, 1, cfg);
  Scalar gap1_kl = 0;
  for (Index x = 0; x < nx; ++x)
    gap1_kl += rho[x] * inv_eta * kl_divergence(star.p1.probs.row(x), br1.probs.row(x));
  report.record("gap1 identity", std::abs(gap1_j - gap1_kl));

  // Gap2: cost of playing pi_hat's second component against pi1*.
  const Scalar gap2_j = objective(g_true, {star.p1, pi_hat.p2}, cfg, rho) -
                        objective(g_true, star, cfg, rho);
  Scalar gap2_kl = 0;
  for (Index x = 0; x < nx; ++x)
    gap2_kl += rho[x] * inv_eta * kl_divergence(pi_hat.p2.probs.row(x), star.p2.probs.row(x));
  report.record("gap2 identity", std::abs(gap2_j - gap2_kl));

  if (g_hat != nullptr) {
    const Scalar slack = 4.0 * tol_oracle;
    Scalar dist2_sq = 0, dist1_sq = 0, uni_sq = 0;
    for (Index x = 0; x < nx; ++x) {
      const Scalar d2 = (pi_hat.p2.probs.row(x) - star.p2.probs.row(x)).cwiseAbs().sum();
      const Scalar d1 = (pi_hat.p1.probs.row(x) - star.p1.probs.row(x)).cwiseAbs().sum();
      dist2_sq += rho[x] * d2 * d2;
      dist1_sq += rho[x] * d1 * d1;
      const Matrix diff = (*g_hat)[x] - g_true[x];
      const Scalar e1 = (diff.transpose() * star.p1.probs.row(x).transpose()).cwiseAbs().maxCoeff();
      uni_sq += rho[x] * e1 * e1;
    }
    report.record("gap1 smoothness bound", gap1_j - (0.5 * cfg.eta * dist2_sq + slack));
    report.record("gap2 smoothness bound",
                  gap2_j - (2.0 * cfg.eta * dist1_sq + 2.0 * cfg.eta * uni_sq + slack));
  }
  return report.finalize();
}

BoundReport check_stability_bound(const PayoffTable& g_true, const PayoffTable& g_hat,
                                  const GameConfig& cfg, const Vector& rho, Scalar tol_oracle) {
  BoundReport report;
  report.name = "stability_bound";
  report.tolerance = 0;
  const JointPolicy star = nash_oracle(g_true, cfg, tol_oracle);
  const JointPolicy hat = nash_oracle(g_hat, cfg, tol_oracle);
  for (Index x = 0; x < rho.size(); ++x) {
    const Scalar lhs = joint_l1_distance(hat, star, x);
    const Scalar rhs = 2.0 * cfg.eta * unilateral_error(g_hat, g_true, star, x) + 4.0 * tol_oracle;
    report.record(lhs - rhs);
  }
  return report.finalize();
}

BoundReport check_opt_convergence(const SelfPlayTrace& trace, Scalar eta, Scalar slack) {
  BoundReport report;
  report.name = "selfplay_convergence";
  report.tolerance = slack;
  bool any_anchor = false;
  for (const TracePoint& pt : trace.points) {
    if (!pt.v_anchor.has_value()) continue;
    any_anchor = true;
    if (pt.t < 1) continue;
    const Scalar envelope = 16.0 * eta * eta / static_cast<Scalar>(pt.t + 1);
    report.record(*pt.v_anchor - envelope);
  }
  if (!any_anchor)
    throw std::invalid_argument("check_opt_convergence: trace has no anchor diagnostics");
  return report.finalize();
}

BoundReport check_insample_bound(const GameInstance& game, const FunctionClass& cls,
                                 const JointPolicy& behavior, const ConcentrationOptions& opts) {
  BoundReport report;
  report.name = "insample_error_bound";
  report.tolerance = 0;
  bool realizable = false;
  for (const PayoffTable& member : cls.members)
    if (tables_equal(member, game.payoff)) realizable = true;
  if (!realizable)
    throw std::invalid_argument("check_insample_bound: class does not contain the true payoff");

  const Scalar bound = 8.0 * std::log(static_cast<Scalar>(cls.size()) / opts.delta);
  long violations = 0;
  for (long k = 0; k < opts.trials; ++k) {
    const std::uint64_t seed = derive_seed(
        opts.master_seed, {static_cast<std::uint64_t>(opts.n), static_cast<std::uint64_t>(k),
                           hash_tag("insample")});
    const OfflineDataset data = sample_dataset(game, behavior, opts.n, opts.noise_sigma, seed);
    const FitResult fit = least_squares_fit(cls, data, &game.payoff);
    if (*fit.residual_vs_truth_sse > bound) ++violations;
  }
  const Scalar freq = static_cast<Scalar>(violations) / static_cast<Scalar>(opts.trials);
  const Scalar threshold = mc_frequency_threshold(opts.delta, opts.trials);
  report.record("violation frequency " + fmt(freq) + " vs " + fmt(threshold), freq - threshold);
  report.instances_checked = opts.trials;
  return report.finalize();
}

BoundReport check_generalization_bound(const GameInstance& game, const FunctionClass& cls,
                                       const JointPolicy& behavior,
                                       const std::vector<long>& n_grid,
                                       const ConcentrationOptions& opts) {
  BoundReport report;
  report.name = "pairwise_generalization_bound";
  report.tolerance = 0;

  // Exact population discrepancy per unordered pair under rho x behavior.
  const std::size_t m = cls.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<Scalar> pop_mse;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      pairs.emplace_back(i, j);
      pop_mse.push_back(mean_squared_error(cls.members[i], cls.members[j], game.rho, behavior));
    }

  const Scalar log_term = std::log(2.0 * static_cast<Scalar>(m) / opts.delta);
  std::vector<Scalar> mse_medians;
  for (long n : n_grid) {
    long gen_violations = 0;
    long envelope_violations = 0;
    std::vector<Scalar> mses;
    mses.reserve(opts.trials);
    for (long k = 0; k < opts.trials; ++k) {
      const std::uint64_t seed =
          derive_seed(opts.master_seed, {static_cast<std::uint64_t>(n),
                                         static_cast<std::uint64_t>(k), hash_tag("generalization")});
      const OfflineDataset data = sample_dataset(game, behavior, n, opts.noise_sigma, seed);

      bool trial_violated = false;
      for (std::size_t p = 0; p < pairs.size() && !trial_violated; ++p) {
        const PayoffTable& gi = cls.members[pairs[p].first];
        const PayoffTable& gj = cls.members[pairs[p].second];
        Scalar in_sample = 0;
        for (const DataRecord& rec : data.records) {
          const Scalar d = gi[rec.x](rec.a1, rec.a2) - gj[rec.x](rec.a1, rec.a2);
          in_sample += d * d;
        }
        const Scalar rhs = 2.0 / n * in_sample + 80.0 / (3.0 * n) * log_term;
        if (pop_mse[p] > rhs) trial_violated = true;
      }
      if (trial_violated) ++gen_violations;

      const FitResult fit = least_squares_fit(cls, data);
      const Scalar mse =
          mean_squared_error(cls.members[fit.chosen_index], game.payoff, game.rho, behavior);
      mses.push_back(mse);
      if (mse > 44.0 * log_term / n) ++envelope_violations;
    }
    const Scalar threshold = mc_frequency_threshold(opts.delta, opts.trials);
    const Scalar gen_freq = static_cast<Scalar>(gen_violations) / opts.trials;
    const Scalar env_freq = static_cast<Scalar>(envelope_violations) / opts.trials;
    report.record("pair bound frequency at n=" + std::to_string(n), gen_freq - threshold);
    report.record("mse envelope frequency at n=" + std::to_string(n), env_freq - threshold);
    mse_medians.push_back(median(std::move(mses)));
    report.instances_checked += opts.trials;
  }

  for (std::size_t i = 1; i < mse_medians.size(); ++i)
    report.record("median mse monotone at step " + std::to_string(i),
                  mse_medians[i] - mse_medians[i - 1]);
  return report.finalize();
}

SlopeFit ols_fit(const std::vector<Scalar>& x, const std::vector<Scalar>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("ols_fit: need >= 2 points");
  const Scalar n = static_cast<Scalar>(x.size());
  Scalar sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const Scalar mx = sx / n, my = sy / n;
  Scalar sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0) throw std::invalid_argument("ols_fit: degenerate x values");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy == 0) {
    fit.r2 = 1.0;
  } else {
    Scalar ss_res = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const Scalar r = y[i] - (fit.intercept + fit.slope * x[i]);
      ss_res += r * r;
    }
    fit.r2 = 1.0 - ss_res / syy;
  }
  return fit;
}

Scalar median(std::vector<Scalar> values) {
  if (values.empty()) throw std::invalid_argument("median: empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t h = values.size() / 2;
  if (values.size() % 2 == 1) return values[h];
  return 0.5 * (values[h - 1] + values[h]);
}

CellResult run_minimax_cell(const GameInstance& game, const FunctionClass& cls,
                            const JointPolicy& behavior, const GameConfig& cfg, long n,
                            Scalar noise_sigma, std::uint64_t cell_seed, Scalar oracle_tol,
                            long oracle_max_iters) {
  const OfflineDataset data = sample_dataset(game, behavior, n, noise_sigma, cell_seed);
  const FitResult fit = least_squares_fit(cls, data);
  const PayoffTable& g_hat = cls.members[fit.chosen_index];
  const JointPolicy pi_hat = nash_oracle(g_hat, cfg, oracle_tol, oracle_max_iters);
  CellResult cell;
  cell.chosen_index = fit.chosen_index;
  cell.dual_gap = duality_gap(game.payoff, pi_hat, cfg, game.rho);
  cell.payoff_mse = mean_squared_error(g_hat, game.payoff, game.rho, behavior);
  return cell;
}

CellResult run_baseline_cell(const GameInstance& game, const FunctionClass& cls,
                             const JointPolicy& behavior, const GameConfig& cfg, long n,
                             Scalar noise_sigma, Scalar delta, std::uint64_t cell_seed,
                             Scalar oracle_tol, long oracle_max_iters) {
  const OfflineDataset data = sample_dataset(game, behavior, n, noise_sigma, cell_seed);
  const PayoffTable lower = pessimistic_fit_baseline(cls, data, delta);
  const JointPolicy pi = nash_oracle(lower, cfg, oracle_tol, oracle_max_iters);
  CellResult cell;
  cell.dual_gap = duality_gap(game.payoff, pi, cfg, game.rho);
  cell.payoff_mse = mean_squared_error(lower, game.payoff, game.rho, behavior);
  return cell;
}

SelfPlayCellResult run_selfplay_cell(const GameInstance& game, const FunctionClass& cls,
                                     const JointPolicy& behavior, const GameConfig& cfg, long n,
                                     Scalar noise_sigma, std::uint64_t cell_seed,
                                     const std::vector<long>& t_grid, Scalar oracle_tol,
                                     long oracle_max_iters) {
  if (t_grid.empty()) throw std::invalid_argument("run_selfplay_cell: empty T grid");
  const OfflineDataset data = sample_dataset(game, behavior, n, noise_sigma, cell_seed);
  const FitResult fit = least_squares_fit(cls, data);
  const PayoffTable& g_hat = cls.members[fit.chosen_index];
  const JointPolicy pi_hat = nash_oracle(g_hat, cfg, oracle_tol, oracle_max_iters);

  SelfPlayCellResult cell;
  cell.gap_hat = duality_gap(game.payoff, pi_hat, cfg, game.rho);
  cell.payoff_mse = mean_squared_error(g_hat, game.payoff, game.rho, behavior);
  cell.gap_at.reserve(t_grid.size());
  cell.v_at.reserve(t_grid.size());

  SelfPlayState state;
  state.pi = JointPolicy{cfg.ref1, cfg.ref2};
  std::size_t next = 0;
  const long t_max = t_grid.back();
  for (long t = 0; t <= t_max && next < t_grid.size(); ++t) {
    if (t_grid[next] == t) {
      cell.gap_at.push_back(duality_gap(game.payoff, state.pi, cfg, game.rho));
      Scalar v = 0;
      for (Index x = 0; x < game.rho.size(); ++x)
        v += game.rho[x] *
             (kl_divergence(pi_hat.p1.probs.row(x), state.pi.p1.probs.row(x)) +
              kl_divergence(pi_hat.p2.probs.row(x), state.pi.p2.probs.row(x)));
      cell.v_at.push_back(v);
      ++next;
    }
    if (t < t_max) state = selfplay_step(state, g_hat, cfg, default_learning_rate(cfg.eta, t));
  }
  return cell;
}

BoundReport minimax_rate_report(const std::vector<long>& n_grid,
                                const std::vector<Scalar>& median_gap, Scalar c_uni, Scalar eta,
                                std::size_t class_size, const RateOptions& opts) {
  BoundReport report;
  report.name = "minimax_fast_rate";
  report.tolerance = 0;
  const Scalar log_term = std::log(static_cast<Scalar>(class_size) / opts.delta);
  const Scalar scale = opts.envelope_constant * (eta + eta * eta * eta) * c_uni * log_term;

  std::vector<Scalar> lx, ly;
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    report.record("envelope at n=" + std::to_string(n_grid[i]),
                  median_gap[i] - scale / static_cast<Scalar>(n_grid[i]));
    if (median_gap[i] <= 0)
      throw std::domain_error("minimax_rate_report: nonpositive median gap at n=" +
                              std::to_string(n_grid[i]));
    lx.push_back(std::log2(static_cast<Scalar>(n_grid[i])));
    ly.push_back(std::log2(median_gap[i]));
  }
  const SlopeFit fit = ols_fit(lx, ly);
  report.record("slope " + fmt(fit.slope) + " in [" + fmt(opts.slope_lo) + ", " +
                    fmt(opts.slope_hi) + "]",
                std::max(fit.slope - opts.slope_hi, opts.slope_lo - fit.slope));
  report.record("r2 " + fmt(fit.r2) + " >= " + fmt(opts.r2_min), opts.r2_min - fit.r2);
  return report.finalize();
}

BoundReport baseline_contrast_report(const std::vector<long>& n_grid,
                                     const std::vector<Scalar>& median_main,
                                     const std::vector<Scalar>& median_baseline, Scalar slope_lo,
                                     Scalar slope_hi) {
  BoundReport report;
  report.name = "baseline_contrast";
  report.tolerance = 0;
  std::vector<Scalar> lx, ly;
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    report.record("dominance at n=" + std::to_string(n_grid[i]),
                  median_main[i] - median_baseline[i]);
    if (median_baseline[i] <= 0)
      throw std::domain_error("baseline_contrast_report: nonpositive median gap at n=" +
                              std::to_string(n_grid[i]));
    lx.push_back(std::log2(static_cast<Scalar>(n_grid[i])));
    ly.push_back(std::log2(median_baseline[i]));
  }
  const SlopeFit fit = ols_fit(lx, ly);
  report.record("baseline slope " + fmt(fit.slope) + " in [" + fmt(slope_lo) + ", " +
                    fmt(slope_hi) + "]",
                std::max(fit.slope - slope_hi, slope_lo - fit.slope));
  return report.finalize();
}

BoundReport check_minimax_rate(const GameInstance& game, const FunctionClass& cls,
                               const JointPolicy& behavior, const GameConfig& cfg,
                               const RateOptions& opts) {
  const JointPolicy star = nash_oracle(game.payoff, cfg, opts.oracle_tol_truth, opts.oracle_max_iters);
  const Scalar c_uni = unilateral_concentrability(cls, behavior, game.rho, star);
  std::vector<Scalar> medians;
  for (long n : opts.n_grid) {
    std::vector<Scalar> gaps;
    for (long s = 0; s < opts.num_seeds; ++s) {
      const std::uint64_t seed =
          derive_seed(opts.master_seed, {static_cast<std::uint64_t>(n),
                                         static_cast<std::uint64_t>(s), hash_tag("minimax")});
      gaps.push_back(run_minimax_cell(game, cls, behavior, cfg, n, opts.noise_sigma, seed,
                                      opts.oracle_tol, opts.oracle_max_iters)
                         .dual_gap);
    }
    medians.push_back(median(std::move(gaps)));
  }
  return minimax_rate_report(opts.n_grid, medians, c_uni, cfg.eta, cls.size(), opts);
}

BoundReport selfplay_rate_report(const std::vector<long>& t_grid,
                                 const std::vector<Scalar>& median_gap, Scalar median_gap_hat,
                                 Scalar c_uni, Scalar eta, std::size_t class_size,
                                 const SelfPlayRateOptions& opts) {
  BoundReport report;
  report.name = "selfplay_rate";
  report.tolerance = 0;
  const Scalar log_term = std::log(static_cast<Scalar>(class_size) / opts.delta);
  const Scalar scale = opts.envelope_constant * (eta + eta * eta * eta);
  const Scalar floor_term = c_uni * log_term / static_cast<Scalar>(opts.n);

  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (t_grid[i] >= 1) {
      const Scalar envelope = scale * (1.0 / static_cast<Scalar>(t_grid[i]) + floor_term);
      report.record("envelope at T=" + std::to_string(t_grid[i]), median_gap[i] - envelope);
    }
    if (i > 0)
      report.record("near-monotone at T=" + std::to_string(t_grid[i]),
                    median_gap[i] - opts.wiggle_factor * median_gap[i - 1]);
    if (static_cast<Scalar>(t_grid[i]) >= static_cast<Scalar>(opts.n))
      report.record("plateau at T=" + std::to_string(t_grid[i]),
                    median_gap[i] - opts.plateau_factor * median_gap_hat);
  }
  report.record("overall decrease", median_gap.back() - median_gap.front());
  return report.finalize();
}

BoundReport check_selfplay_rate(const GameInstance& game, const FunctionClass& cls,
                                const JointPolicy& behavior, const GameConfig& cfg,
                                const SelfPlayRateOptions& opts) {
  if (opts.t_grid.empty()) throw std::invalid_argument("check_selfplay_rate: empty T grid");
  const JointPolicy star = nash_oracle(game.payoff, cfg, opts.oracle_tol_truth, opts.oracle_max_iters);
  const Scalar c_uni = unilateral_concentrability(cls, behavior, game.rho, star);

  std::vector<std::vector<Scalar>> gaps_at(opts.t_grid.size());
  std::vector<Scalar> gap_hats;
  for (long s = 0; s < opts.num_seeds; ++s) {
    const std::uint64_t seed =
        derive_seed(opts.master_seed, {static_cast<std::uint64_t>(opts.n),
                                       static_cast<std::uint64_t>(s), hash_tag("selfplay")});
    const SelfPlayCellResult cell =
        run_selfplay_cell(game, cls, behavior, cfg, opts.n, opts.noise_sigma, seed, opts.t_grid,
                          opts.oracle_tol, opts.oracle_max_iters);
    gap_hats.push_back(cell.gap_hat);
    for (std::size_t i = 0; i < opts.t_grid.size(); ++i) gaps_at[i].push_back(cell.gap_at[i]);
  }
  std::vector<Scalar> medians;
  for (auto& column : gaps_at) medians.push_back(median(std::move(column)));
  return selfplay_rate_report(opts.t_grid, medians, median(std::move(gap_hats)), c_uni, cfg.eta,
                              cls.size(), opts);
}

}  // namespace klgame
