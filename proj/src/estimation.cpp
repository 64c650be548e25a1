#include "klgame/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "klgame/rng.hpp"

namespace klgame {

OfflineDataset sample_dataset(const GameInstance& game, const JointPolicy& behavior,
                              std::size_t n, Scalar noise_sigma, std::uint64_t seed) {
  if (noise_sigma < 0) throw std::invalid_argument("sample_dataset: noise_sigma must be >= 0");
  if (behavior.p1.num_contexts() != game.num_contexts ||
      behavior.p1.num_actions() != game.num_actions ||
      behavior.p2.num_contexts() != game.num_contexts ||
      behavior.p2.num_actions() != game.num_actions)
    throw std::invalid_argument("sample_dataset: behavior shape mismatch");

  OfflineDataset data;
  data.behavior = behavior;
  data.seed = seed;
  data.records.reserve(n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    DataRecord rec;
    rec.x = rng.categorical(game.rho);
    rec.a1 = rng.categorical(behavior.p1.probs.row(rec.x));
    rec.a2 = rng.categorical(behavior.p2.probs.row(rec.x));
    rec.p = game.payoff[rec.x](rec.a1, rec.a2);
    if (noise_sigma > 0) rec.p += noise_sigma * rng.normal();
    data.records.push_back(rec);
  }
  return data;
}

namespace {

Scalar sse_against(const PayoffTable& g, const std::vector<DataRecord>& records) {
  Scalar sse = 0;
  for (const DataRecord& rec : records) {
    const Scalar r = g[rec.x](rec.a1, rec.a2) - rec.p;
    sse += r * r;
  }
  return sse;
}

std::vector<Scalar> all_sse(const FunctionClass& cls, const OfflineDataset& data) {
  std::vector<Scalar> sse(cls.size());
  for (std::size_t m = 0; m < cls.size(); ++m) sse[m] = sse_against(cls.members[m], data.records);
  return sse;
}

}  // namespace

FitResult least_squares_fit(const FunctionClass& cls, const OfflineDataset& data,
                            const PayoffTable* g_true) {
  if (cls.members.empty()) throw std::invalid_argument("least_squares_fit: empty class");
  const std::vector<Scalar> sse = all_sse(cls, data);
  FitResult fit;
  for (std::size_t m = 1; m < sse.size(); ++m)
    if (sse[m] < sse[fit.chosen_index]) fit.chosen_index = m;
  fit.in_sample_sse = sse[fit.chosen_index];
  if (g_true != nullptr) {
    Scalar r2 = 0;
    const PayoffTable& chosen = cls.members[fit.chosen_index];
    for (const DataRecord& rec : data.records) {
      const Scalar d = chosen[rec.x](rec.a1, rec.a2) - (*g_true)[rec.x](rec.a1, rec.a2);
      r2 += d * d;
    }
    fit.residual_vs_truth_sse = r2;
  }
  return fit;
}

Scalar mean_squared_error(const PayoffTable& a, const PayoffTable& b, const Vector& rho,
                          const JointPolicy& behavior) {
  Scalar mse = 0;
  for (Index x = 0; x < rho.size(); ++x) {
    if (rho[x] == 0) continue;
    const Matrix diff2 = (a[x] - b[x]).array().square();
    mse += rho[x] * (behavior.p1.probs.row(x) * diff2 * behavior.p2.probs.row(x).transpose()).value();
  }
  return mse;
}

PayoffTable d2_divergence_table(const FunctionClass& cls, const JointPolicy& behavior,
                                const Vector& rho) {
  if (cls.members.empty()) throw std::invalid_argument("d2_divergence: empty class");
  const Index nx = rho.size();
  const Index na = behavior.p1.num_actions();
  PayoffTable sup(nx, Matrix::Zero(na, na));
  constexpr Scalar inf = std::numeric_limits<Scalar>::infinity();

  for (std::size_t i = 0; i < cls.size(); ++i) {
    for (std::size_t j = i + 1; j < cls.size(); ++j) {
      // (g, h) and (h, g) give the same ratio, so unordered pairs suffice.
      Scalar denom = 0;
      std::vector<Matrix> diff2(nx);
      for (Index x = 0; x < nx; ++x) {
        diff2[x] = (cls.members[i][x] - cls.members[j][x]).array().square();
        if (rho[x] > 0)
          denom += rho[x] *
                   (behavior.p1.probs.row(x) * diff2[x] * behavior.p2.probs.row(x).transpose())
                       .value();
      }
      for (Index x = 0; x < nx; ++x) {
        for (Index a1 = 0; a1 < na; ++a1) {
          for (Index a2 = 0; a2 < na; ++a2) {
            const Scalar num = diff2[x](a1, a2);
            if (num == 0) continue;  // 0/0 contributes 0
            const Scalar ratio = denom > 0 ? num / denom : inf;
            if (ratio > sup[x](a1, a2)) sup[x](a1, a2) = ratio;
          }
        }
      }
    }
  }
  return sup;
}

Scalar d2_divergence(const FunctionClass& cls, const JointPolicy& behavior, const Vector& rho,
                     Index x, Index a1, Index a2) {
  const PayoffTable sup = d2_divergence_table(cls, behavior, rho);
  if (x < 0 || x >= static_cast<Index>(sup.size()) || a1 < 0 || a1 >= sup[x].rows() || a2 < 0 ||
      a2 >= sup[x].cols())
    throw std::invalid_argument("d2_divergence: index out of range");
  return sup[x](a1, a2);
}

Scalar unilateral_concentrability(const FunctionClass& cls, const JointPolicy& behavior,
                                  const Vector& rho, const JointPolicy& nash) {
  const PayoffTable d2 = d2_divergence_table(cls, behavior, rho);
  Scalar worst = 0;
  for (int player = 1; player <= 2; ++player) {
    Scalar total = 0;
    for (Index x = 0; x < rho.size(); ++x) {
      if (rho[x] == 0) continue;
      // The expectation is linear in the deviating policy, so the sup is a
      // deterministic action per context.
      Vector against_fixed;
      if (player == 1)
        against_fixed = d2[x] * nash.p2.probs.row(x).transpose();
      else
        against_fixed = d2[x].transpose() * nash.p1.probs.row(x).transpose();
      total += rho[x] * against_fixed.maxCoeff();
    }
    worst = std::max(worst, total);
  }
  return worst;
}

PayoffTable pessimistic_fit_baseline(const FunctionClass& cls, const OfflineDataset& data,
                                     Scalar delta) {
  if (cls.members.empty()) throw std::invalid_argument("pessimistic_fit_baseline: empty class");
  if (!(delta > 0) || !(delta < 1))
    throw std::invalid_argument("pessimistic_fit_baseline: delta must be in (0, 1)");
  const std::vector<Scalar> sse = all_sse(cls, data);
  const Scalar best = *std::min_element(sse.begin(), sse.end());
  const Scalar radius = 8.0 * std::log(static_cast<Scalar>(cls.size()) / delta);

  PayoffTable lower = cls.members.front();
  bool seeded = false;
  for (std::size_t m = 0; m < cls.size(); ++m) {
    if (sse[m] > best + radius) continue;
    if (!seeded) {
      lower = cls.members[m];
      seeded = true;
    } else {
      for (std::size_t x = 0; x < lower.size(); ++x)
        lower[x] = lower[x].cwiseMin(cls.members[m][x]);
    }
  }
  return lower;
}

}  // namespace klgame
