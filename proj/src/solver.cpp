#include "klgame/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace klgame {

std::pair<Vector, Vector> payoff_vectors(const PayoffTable& g, const JointPolicy& pi, Index x) {
  Vector f1 = g[x] * pi.p2.probs.row(x).transpose();
  Vector f2 = g[x].transpose() * pi.p1.probs.row(x).transpose();
  return {std::move(f1), std::move(f2)};
}

SelfPlayState selfplay_step(const SelfPlayState& state, const PayoffTable& g,
                            const GameConfig& cfg, Scalar alpha) {
  const Scalar c = alpha / cfg.eta;
  if (!(alpha > 0) || c > 1.0 + 1e-15)
    throw std::invalid_argument("selfplay_step: require 0 < alpha * eta^-1 <= 1");

  SelfPlayState next;
  next.t = state.t + 1;
  const Index nx = state.pi.p1.num_contexts();
  const Index na = state.pi.p1.num_actions();
  next.pi.p1.probs.resize(nx, na);
  next.pi.p2.probs.resize(nx, na);

  for (Index x = 0; x < nx; ++x) {
    const auto [f1, f2] = payoff_vectors(g, state.pi, x);
    // log pi^{t+1} ~ (1-c) log pi^t + alpha * (+-f) + c * log ref
    const Vector w1 = (1 - c) * state.pi.p1.probs.row(x).transpose().array().log().matrix() +
                      alpha * f1 +
                      c * cfg.ref1.probs.row(x).transpose().array().log().matrix();
    const Vector w2 = (1 - c) * state.pi.p2.probs.row(x).transpose().array().log().matrix() -
                      alpha * f2 +
                      c * cfg.ref2.probs.row(x).transpose().array().log().matrix();
    next.pi.p1.probs.row(x) = softmax(w1).transpose();
    next.pi.p2.probs.row(x) = softmax(w2).transpose();
  }
  return next;
}

namespace {

Scalar anchor_divergence(const JointPolicy& anchor, const JointPolicy& pi, const Vector& rho) {
  Scalar v = 0;
  for (Index x = 0; x < rho.size(); ++x) {
    if (rho[x] == 0) continue;
    v += rho[x] * (kl_divergence(anchor.p1.probs.row(x), pi.p1.probs.row(x)) +
                   kl_divergence(anchor.p2.probs.row(x), pi.p2.probs.row(x)));
  }
  return v;
}

}  // namespace

std::pair<JointPolicy, SelfPlayTrace> selfplay_run(const PayoffTable& g, const GameConfig& cfg,
                                                   const Vector& rho, long T,
                                                   const SelfPlayOptions& options) {
  if (T < 0) throw std::invalid_argument("selfplay_run: T must be >= 0");
  SelfPlayState state;
  state.pi = JointPolicy{cfg.ref1, cfg.ref2};

  SelfPlayTrace trace;
  trace.points.reserve(static_cast<std::size_t>(T) + 1);
  const auto record = [&](const SelfPlayState& s) {
    TracePoint pt;
    pt.t = s.t;
    pt.alpha = default_learning_rate(cfg.eta, s.t);
    if (options.anchor != nullptr) pt.v_anchor = anchor_divergence(*options.anchor, s.pi, rho);
    if (options.residual_every > 0 &&
        (s.t % options.residual_every == 0 || s.t == T))
      pt.residual = fixed_point_residual(g, s.pi, cfg);
    trace.points.push_back(std::move(pt));
  };

  record(state);
  for (long t = 0; t < T; ++t) {
    state = selfplay_step(state, g, cfg, default_learning_rate(cfg.eta, t));
    record(state);
  }
  return {std::move(state.pi), std::move(trace)};
}

Scalar fixed_point_residual(const PayoffTable& g, const JointPolicy& pi, const GameConfig& cfg) {
  Scalar res = 0;
  for (Index x = 0; x < pi.p1.num_contexts(); ++x) {
    const Vector br1 = best_response(g, pi.p2, 1, cfg, x);
    const Vector br2 = best_response(g, pi.p1, 2, cfg, x);
    res = std::max(res, (pi.p1.probs.row(x).transpose() - br1).cwiseAbs().sum());
    res = std::max(res, (pi.p2.probs.row(x).transpose() - br2).cwiseAbs().sum());
  }
  return res;
}

NonconvergenceError::NonconvergenceError(Scalar residual, long iterations)
    : std::runtime_error("nash_oracle: residual " + std::to_string(residual) + " after " +
                         std::to_string(iterations) + " iterations"),
      last_residual(residual),
      iterations(iterations) {}

JointPolicy nash_oracle(const PayoffTable& g, const GameConfig& cfg, Scalar tol, long max_iters) {
  if (!(tol > 0)) throw std::invalid_argument("nash_oracle: tol must be positive");
  // Damped best-response iteration: the skew coupling contributes eigenvalues
  // of magnitude up to eta, so the damping fraction must stay below
  // 2/(1 + eta^2) for the linearized map to contract.
  const Scalar step_fraction = std::min(Scalar{0.9}, Scalar{2} / (Scalar{2} + cfg.eta * cfg.eta));
  const Scalar alpha = step_fraction * cfg.eta;
  constexpr long kCheckEvery = 50;

  SelfPlayState state;
  state.pi = JointPolicy{cfg.ref1, cfg.ref2};
  Scalar residual = std::numeric_limits<Scalar>::infinity();
  for (long t = 0; t < max_iters; ++t) {
    if (t % kCheckEvery == 0) {
      residual = fixed_point_residual(g, state.pi, cfg);
      if (residual <= tol) return state.pi;
    }
    state = selfplay_step(state, g, cfg, alpha);
  }
  residual = fixed_point_residual(g, state.pi, cfg);
  if (residual <= tol) return state.pi;
  throw NonconvergenceError(residual, max_iters);
}

}  // namespace klgame
