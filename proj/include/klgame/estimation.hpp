#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "klgame/types.hpp"

namespace klgame {

/// Finite hypothesis class of payoff tables, all sharing one shape.
struct FunctionClass {
  std::vector<PayoffTable> members;

  std::size_t size() const { return members.size(); }
};

struct DataRecord {
  Index x = 0;
  Index a1 = 0;
  Index a2 = 0;
  Scalar p = 0;  // noisy payoff feedback; may land outside [-1, 1]
};

struct OfflineDataset {
  std::vector<DataRecord> records;
  JointPolicy behavior;
  std::uint64_t seed = 0;
};

/// i.i.d. draws: x ~ rho, a_i ~ behavior_i(.|x), p = g(x,a1,a2) + N(0, sigma^2).
/// Bit-identical output for identical inputs and seed.
OfflineDataset sample_dataset(const GameInstance& game, const JointPolicy& behavior,
                              std::size_t n, Scalar noise_sigma, std::uint64_t seed);

struct FitResult {
  std::size_t chosen_index = 0;
  Scalar in_sample_sse = 0;
  std::optional<Scalar> residual_vs_truth_sse;  // sum_i (g_hat(z_i) - g_true(z_i))^2
};

/// Least-squares selection over the class; ties broken by lowest index.
/// When g_true is supplied the in-sample residual against it is recorded.
FitResult least_squares_fit(const FunctionClass& cls, const OfflineDataset& data,
                            const PayoffTable* g_true = nullptr);

/// Pointwise extrapolation factor at (x, a1, a2):
///   sup over ordered pairs (g, h) of (g-h)^2 at the point over its
///   rho x behavior average. 0/0 pairs contribute 0; a positive numerator over
///   a zero denominator yields +infinity (a diagnostic value, not an error).
Scalar d2_divergence(const FunctionClass& cls, const JointPolicy& behavior, const Vector& rho,
                     Index x, Index a1, Index a2);

/// The divergence at every triple in one pass over the class pairs.
PayoffTable d2_divergence_table(const FunctionClass& cls, const JointPolicy& behavior,
                                const Vector& rho);

/// Worst-case data-to-deviation shift factor: max over players of
///   sup_{pi_i} E_{rho x pi_i x nash_{-i}}[D^2].
/// The sup is linear in pi_i, so it is attained by a deterministic deviation
/// per context and computed by maximizing over actions.
Scalar unilateral_concentrability(const FunctionClass& cls, const JointPolicy& behavior,
                                  const Vector& rho, const JointPolicy& nash);

/// Lower-confidence comparator: entrywise minimum over the version space
///   V = { g in cls : SSE(g) <= SSE(g_hat) + 8 log(|cls|/delta) }.
/// Used only to exhibit the slower conservative baseline.
PayoffTable pessimistic_fit_baseline(const FunctionClass& cls, const OfflineDataset& data,
                                     Scalar delta);

/// E_{rho x behavior}[ (a - b)^2 ], enumerated exactly.
Scalar mean_squared_error(const PayoffTable& a, const PayoffTable& b, const Vector& rho,
                          const JointPolicy& behavior);

}  // namespace klgame
