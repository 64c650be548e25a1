#include "klgame/game.hpp"

namespace klgame {

namespace {

void check_dims(const PayoffTable& g, const JointPolicy& pi, const GameConfig& cfg,
                const Vector& rho) {
  const Index nx = rho.size();
  const Index na = cfg.ref1.num_actions();
  if (static_cast<Index>(g.size()) != nx) throw std::invalid_argument("payoff/rho context mismatch");
  if (pi.p1.num_contexts() != nx || pi.p2.num_contexts() != nx ||
      pi.p1.num_actions() != na || pi.p2.num_actions() != na)
    throw std::invalid_argument("policy shape mismatch");
  if (cfg.ref1.num_contexts() != nx)
    throw std::invalid_argument("reference/rho context mismatch");
  for (const Matrix& gx : g)
    if (gx.rows() != na || gx.cols() != na) throw std::invalid_argument("payoff matrix shape mismatch");
}

}  // namespace

Scalar objective(const PayoffTable& g, const JointPolicy& pi, const GameConfig& cfg,
                 const Vector& rho) {
  check_dims(g, pi, cfg, rho);
  const Scalar inv_eta = Scalar{1} / cfg.eta;
  Scalar value = 0;
  for (Index x = 0; x < rho.size(); ++x) {
    if (rho[x] == 0) continue;
    const Scalar payoff = (pi.p1.probs.row(x) * g[x] * pi.p2.probs.row(x).transpose()).value();
    const Scalar kl1 = kl_divergence(pi.p1.probs.row(x), cfg.ref1.probs.row(x));
    const Scalar kl2 = kl_divergence(pi.p2.probs.row(x), cfg.ref2.probs.row(x));
    value += rho[x] * (payoff - inv_eta * kl1 + inv_eta * kl2);
  }
  return value;
}

Vector best_response(const PayoffTable& g, const Policy& opponent, int player,
                     const GameConfig& cfg, Index x) {
  if (player != 1 && player != 2) throw std::invalid_argument("best_response: player must be 1 or 2");
  if (player == 1) {
    const Vector expected = g[x] * opponent.probs.row(x).transpose();
    return softmax(cfg.eta * expected + cfg.ref1.probs.row(x).transpose().array().log().matrix());
  }
  const Vector expected = g[x].transpose() * opponent.probs.row(x).transpose();
  return softmax(-cfg.eta * expected + cfg.ref2.probs.row(x).transpose().array().log().matrix());
}

Policy best_response_policy(const PayoffTable& g, const Policy& opponent, int player,
                            const GameConfig& cfg) {
  Policy out;
  out.probs.resize(opponent.num_contexts(), opponent.num_actions());
  for (Index x = 0; x < opponent.num_contexts(); ++x)
    out.probs.row(x) = best_response(g, opponent, player, cfg, x).transpose();
  return out;
}

Scalar best_response_value(const PayoffTable& g, const JointPolicy& pi, int responder,
                           const GameConfig& cfg, const Vector& rho) {
  JointPolicy replaced = pi;
  if (responder == 1)
    replaced.p1 = best_response_policy(g, pi.p2, 1, cfg);
  else if (responder == 2)
    replaced.p2 = best_response_policy(g, pi.p1, 2, cfg);
  else
    throw std::invalid_argument("best_response_value: responder must be 1 or 2");
  return objective(g, replaced, cfg, rho);
}

Scalar duality_gap(const PayoffTable& g, const JointPolicy& pi, const GameConfig& cfg,
                   const Vector& rho) {
  const Scalar gap = best_response_value(g, pi, 1, cfg, rho) -
                     best_response_value(g, pi, 2, cfg, rho);
  return std::max(gap, Scalar{0});
}

}  // namespace klgame
