#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace klgame {

using Scalar = double;
using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Matrix = Eigen::MatrixXd;

/// Logits over the action set for one (context, player) pair.
using LogitVector = Vector;

/// payoff[x](a1, a2) in [-1, 1]; player 1 picks the row, player 2 the column.
/// Player 1 maximizes, player 2 minimizes.
using PayoffTable = std::vector<Matrix>;

inline constexpr Scalar kNormTol = 1e-12;   // row/distribution normalization tolerance
inline constexpr Scalar kTinyProb = 1e-300; // evaluation-time underflow clamp, never stored

/// Per-context action distribution for one player; each row of `probs` sums to 1.
struct Policy {
  Matrix probs;  // num_contexts x num_actions

  Index num_contexts() const { return probs.rows(); }
  Index num_actions() const { return probs.cols(); }

  static Policy uniform(Index num_contexts, Index num_actions);
};

struct JointPolicy {
  Policy p1;
  Policy p2;
};

/// Regularization strength and the anchor policies the KL penalties pull toward.
/// Both references must be strictly positive row-stochastic tables.
struct GameConfig {
  Scalar eta = 1.0;
  Policy ref1;
  Policy ref2;

  static GameConfig uniform(Scalar eta, Index num_contexts, Index num_actions);
};

/// Ground-truth environment: context distribution plus payoff tensor.
struct GameInstance {
  Index num_contexts = 0;
  Index num_actions = 0;
  Vector rho;          // distribution over contexts
  PayoffTable payoff;  // num_contexts matrices, each num_actions x num_actions
};

void validate_distribution(const Vector& p, const std::string& what);
void validate_policy(const Policy& pi, const std::string& what);
/// Positivity on the reference support (learned policies must not drop mass
/// from any action the reference plays).
void validate_policy_support(const Policy& pi, const Policy& reference, const std::string& what);
void validate_payoff_table(const PayoffTable& g, Index num_contexts, Index num_actions,
                           const std::string& what);
void validate_game(const GameInstance& game);
void validate_game_config(const GameConfig& cfg);

/// l1 distance of two joint policies at one context: sum of the per-player row distances.
Scalar joint_l1_distance(const JointPolicy& a, const JointPolicy& b, Index x);

}  // namespace klgame
