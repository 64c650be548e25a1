#pragma once

#include <cmath>
#include <stdexcept>

#include "klgame/types.hpp"

namespace klgame {

/// Softmax with max-subtraction; accepts any vector expression.
/// Output is strictly positive and sums to 1.
template <typename Derived>
Vector softmax(const Eigen::MatrixBase<Derived>& logits) {
  if (logits.rows() != 1 && logits.cols() != 1)
    throw std::invalid_argument("softmax: expected a vector");
  Vector z(logits.size());
  for (Index i = 0; i < z.size(); ++i) z[i] = logits(i);
  if (!z.allFinite()) throw std::invalid_argument("softmax: non-finite logit");
  const Scalar shift = z.maxCoeff();
  Vector p = (z.array() - shift).exp();
  p /= p.sum();
  return p;
}

/// KL(p || q) with the 0 log 0 = 0 convention. Throws std::domain_error if p
/// puts mass where q has none. Inputs are clamped at kTinyProb only inside the
/// log, never mutated.
template <typename DP, typename DQ>
Scalar kl_divergence(const Eigen::MatrixBase<DP>& p, const Eigen::MatrixBase<DQ>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: length mismatch");
  Scalar acc = 0;
  for (Index i = 0; i < p.size(); ++i) {
    const Scalar pi = p(i);
    if (pi <= 0) continue;
    const Scalar qi = q(i);
    if (qi <= 0) throw std::domain_error("kl_divergence: support violation (p > 0 where q = 0)");
    acc += pi * std::log(std::max(pi, kTinyProb) / std::max(qi, kTinyProb));
  }
  return std::max(acc, Scalar{0});
}

/// Regularized value of a joint policy:
///   E_rho[ pi1' G_x pi2 - eta^-1 KL(pi1||ref1) + eta^-1 KL(pi2||ref2) ].
/// Player 1 maximizes this, player 2 minimizes it.
Scalar objective(const PayoffTable& g, const JointPolicy& pi, const GameConfig& cfg,
                 const Vector& rho);

/// Closed-form regularized best response at context x.
/// Player 1 returns softmax(eta * G_x * opp + log ref1); player 2 negates the
/// payoff term (it minimizes).
Vector best_response(const PayoffTable& g, const Policy& opponent, int player,
                     const GameConfig& cfg, Index x);

/// Best response at every context, as a Policy.
Policy best_response_policy(const PayoffTable& g, const Policy& opponent, int player,
                            const GameConfig& cfg);

/// Value after replacing the responder's policy by its best response
/// context-wise. Exact: the regularized best response is unique and closed-form.
Scalar best_response_value(const PayoffTable& g, const JointPolicy& pi, int responder,
                           const GameConfig& cfg, const Vector& rho);

/// J(g, dagger, pi2) - J(g, pi1, dagger), clamped at 0 for reporting.
/// Zero exactly at the regularized Nash equilibrium.
Scalar duality_gap(const PayoffTable& g, const JointPolicy& pi, const GameConfig& cfg,
                   const Vector& rho);

}  // namespace klgame
