#include "klgame/types.hpp"

#include <cmath>

namespace klgame {

Policy Policy::uniform(Index num_contexts, Index num_actions) {
  Policy pi;
  pi.probs = Matrix::Constant(num_contexts, num_actions, Scalar{1} / static_cast<Scalar>(num_actions));
  return pi;
}

GameConfig GameConfig::uniform(Scalar eta, Index num_contexts, Index num_actions) {
  GameConfig cfg;
  cfg.eta = eta;
  cfg.ref1 = Policy::uniform(num_contexts, num_actions);
  cfg.ref2 = cfg.ref1;
  return cfg;
}

void validate_distribution(const Vector& p, const std::string& what) {
  if (p.size() == 0) throw std::invalid_argument(what + ": empty distribution");
  if (!p.allFinite()) throw std::invalid_argument(what + ": non-finite entry");
  if ((p.array() < 0).any()) throw std::invalid_argument(what + ": negative entry");
  if (std::abs(p.sum() - 1.0) > kNormTol) throw std::invalid_argument(what + ": does not sum to 1");
}

void validate_policy(const Policy& pi, const std::string& what) {
  if (pi.probs.rows() == 0 || pi.probs.cols() == 0)
    throw std::invalid_argument(what + ": empty policy table");
  if (!pi.probs.allFinite()) throw std::invalid_argument(what + ": non-finite entry");
  if ((pi.probs.array() < 0).any()) throw std::invalid_argument(what + ": negative probability");
  for (Index x = 0; x < pi.num_contexts(); ++x) {
    if (std::abs(pi.probs.row(x).sum() - 1.0) > kNormTol)
      throw std::invalid_argument(what + ": row " + std::to_string(x) + " does not sum to 1");
  }
}

void validate_policy_support(const Policy& pi, const Policy& reference, const std::string& what) {
  if (pi.probs.rows() != reference.probs.rows() || pi.probs.cols() != reference.probs.cols())
    throw std::invalid_argument(what + ": shape differs from reference");
  for (Index x = 0; x < pi.num_contexts(); ++x)
    for (Index a = 0; a < pi.num_actions(); ++a)
      if (reference.probs(x, a) > 0 && !(pi.probs(x, a) > 0))
        throw std::invalid_argument(what + ": zero mass on reference support");
}

void validate_payoff_table(const PayoffTable& g, Index num_contexts, Index num_actions,
                           const std::string& what) {
  if (static_cast<Index>(g.size()) != num_contexts)
    throw std::invalid_argument(what + ": wrong number of contexts");
  for (const Matrix& gx : g) {
    if (gx.rows() != num_actions || gx.cols() != num_actions)
      throw std::invalid_argument(what + ": wrong payoff matrix shape");
    if (!gx.allFinite()) throw std::invalid_argument(what + ": non-finite payoff");
    if ((gx.array().abs() > 1.0).any())
      throw std::invalid_argument(what + ": payoff outside [-1, 1]");
  }
}

void validate_game(const GameInstance& game) {
  if (game.num_contexts <= 0 || game.num_actions <= 0)
    throw std::invalid_argument("game: dimensions must be positive");
  if (game.rho.size() != game.num_contexts)
    throw std::invalid_argument("game: rho length mismatch");
  validate_distribution(game.rho, "game.rho");
  validate_payoff_table(game.payoff, game.num_contexts, game.num_actions, "game.payoff");
}

void validate_game_config(const GameConfig& cfg) {
  if (!(cfg.eta > 0)) throw std::invalid_argument("config: eta must be positive");
  validate_policy(cfg.ref1, "config.ref1");
  validate_policy(cfg.ref2, "config.ref2");
  // References anchor the KL terms and the softmax logits; zero entries would
  // push logits to -inf, so we require full support.
  if ((cfg.ref1.probs.array() <= 0).any() || (cfg.ref2.probs.array() <= 0).any())
    throw std::invalid_argument("config: reference rows must be strictly positive");
  if (cfg.ref1.probs.rows() != cfg.ref2.probs.rows() ||
      cfg.ref1.probs.cols() != cfg.ref2.probs.cols())
    throw std::invalid_argument("config: reference shapes differ");
}

Scalar joint_l1_distance(const JointPolicy& a, const JointPolicy& b, Index x) {
  return (a.p1.probs.row(x) - b.p1.probs.row(x)).cwiseAbs().sum() +
         (a.p2.probs.row(x) - b.p2.probs.row(x)).cwiseAbs().sum();
}

}  // namespace klgame
