#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "klgame/game.hpp"
#include "klgame/types.hpp"

namespace klgame {

/// Step schedule of the self-play dynamics; alpha_t * eta^-1 = 2/(t+2) <= 1
/// for every t >= 0.
inline Scalar default_learning_rate(Scalar eta, long t) {
  return 2.0 * eta / static_cast<Scalar>(t + 2);
}

struct SelfPlayState {
  long t = 0;
  JointPolicy pi;
};

struct TracePoint {
  long t = 0;
  Scalar alpha = 0;
  std::optional<Scalar> v_anchor;  // E_rho[KL(anchor1||pi1) + KL(anchor2||pi2)]
  std::optional<Scalar> residual;  // populated at the residual check cadence only
};

struct SelfPlayTrace {
  std::vector<TracePoint> points;
};

struct SelfPlayOptions {
  const JointPolicy* anchor = nullptr;  // when set, v_anchor is recorded each iteration
  long residual_every = 0;              // 0 disables residual recording
};

/// Expected payoff of each own action against the opponent's current mixture:
/// f1(a1) = E_{a2~pi2}[g(x,a1,a2)], f2(a2) = E_{a1~pi1}[g(x,a1,a2)].
std::pair<Vector, Vector> payoff_vectors(const PayoffTable& g, const JointPolicy& pi, Index x);

/// One coupled mirror step. Both players move simultaneously from the payoff
/// vectors of the incoming state; player 2 descends. Computed in log space
/// with one renormalization per row. Requires 0 < alpha * eta^-1 <= 1.
SelfPlayState selfplay_step(const SelfPlayState& state, const PayoffTable& g,
                            const GameConfig& cfg, Scalar alpha);

/// Runs T steps from (ref1, ref2) with alpha_t = 2*eta/(t+2). The trace holds
/// one point per iterate t = 0..T.
std::pair<JointPolicy, SelfPlayTrace> selfplay_run(const PayoffTable& g, const GameConfig& cfg,
                                                   const Vector& rho, long T,
                                                   const SelfPlayOptions& options = {});

/// Max over contexts and players of || pi_i(.|x) - BR_i(pi_{-i})(.|x) ||_1.
/// Zero exactly at the regularized Nash equilibrium of g.
Scalar fixed_point_residual(const PayoffTable& g, const JointPolicy& pi, const GameConfig& cfg);

struct NonconvergenceError : std::runtime_error {
  NonconvergenceError(Scalar residual, long iterations);
  Scalar last_residual;
  long iterations;
};

/// Equilibrium solver: the self-play update operator with a constant step
/// sized for geometric convergence, iterated until fixed_point_residual <= tol
/// (checked every 50 iterations). The decaying schedule used by selfplay_run
/// contracts only like 1/T, far too slow for the tolerances needed here.
/// Throws NonconvergenceError if max_iters is exhausted first.
JointPolicy nash_oracle(const PayoffTable& g, const GameConfig& cfg, Scalar tol = 1e-10,
                        long max_iters = 1000000);

}  // namespace klgame
