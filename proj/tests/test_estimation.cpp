#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>

#include "klgame/estimation.hpp"
#include "klgame/harness.hpp"
#include "test_util.hpp"

using namespace klgame;
using namespace klgame::testing;

namespace {

JointPolicy uniform_behavior(Index nx, Index na) {
  return {Policy::uniform(nx, na), Policy::uniform(nx, na)};
}

}  // namespace

TEST_CASE("sample_dataset determinism and degenerate cases") {
  const GameInstance game = random_game(3, 4, 10);
  const JointPolicy behavior = uniform_behavior(3, 4);

  const OfflineDataset empty = sample_dataset(game, behavior, 0, 0.5, 42);
  CHECK(empty.records.empty());

  const OfflineDataset a = sample_dataset(game, behavior, 300, 0.5, 42);
  const OfflineDataset b = sample_dataset(game, behavior, 300, 0.5, 42);
  REQUIRE(a.records.size() == 300);
  bool identical = true;
  for (std::size_t i = 0; i < a.records.size(); ++i)
    identical = identical && a.records[i].x == b.records[i].x &&
                a.records[i].a1 == b.records[i].a1 && a.records[i].a2 == b.records[i].a2 &&
                a.records[i].p == b.records[i].p;
  CHECK(identical);

  const OfflineDataset c = sample_dataset(game, behavior, 300, 0.5, 43);
  bool differs = false;
  for (std::size_t i = 0; i < c.records.size(); ++i)
    differs = differs || c.records[i].x != a.records[i].x || c.records[i].a1 != a.records[i].a1 ||
              c.records[i].a2 != a.records[i].a2;
  CHECK(differs);

  const OfflineDataset noiseless = sample_dataset(game, behavior, 200, 0.0, 42);
  for (const DataRecord& rec : noiseless.records)
    CHECK(rec.p == game.payoff[rec.x](rec.a1, rec.a2));

  CHECK_THROWS_AS(sample_dataset(game, behavior, 10, -0.1, 42), std::invalid_argument);
}

TEST_CASE("sample_dataset frequencies match the product distribution") {
  const Index nx = 2, na = 3;
  const GameInstance game = random_game(nx, na, 20);
  Rng prng(21);
  const JointPolicy behavior{random_policy(nx, na, prng), random_policy(nx, na, prng)};
  const std::size_t n = 100000;
  const OfflineDataset data = sample_dataset(game, behavior, n, 0.0, 7);

  std::map<std::tuple<Index, Index, Index>, long> counts;
  for (const DataRecord& rec : data.records) ++counts[{rec.x, rec.a1, rec.a2}];
  for (Index x = 0; x < nx; ++x)
    for (Index a1 = 0; a1 < na; ++a1)
      for (Index a2 = 0; a2 < na; ++a2) {
        const Scalar p =
            game.rho[x] * behavior.p1.probs(x, a1) * behavior.p2.probs(x, a2);
        const Scalar expected = static_cast<Scalar>(n) * p;
        const Scalar sd = std::sqrt(static_cast<Scalar>(n) * p * (1 - p));
        CHECK(std::abs(static_cast<Scalar>(counts[{x, a1, a2}]) - expected) <= 3.0 * sd);
      }
}

TEST_CASE("least squares fit") {
  const GameInstance game = random_game(2, 3, 30);
  const JointPolicy behavior = uniform_behavior(2, 3);

  FunctionClass cls;
  cls.members.push_back(game.payoff);
  PayoffTable shifted = game.payoff;
  for (Matrix& gx : shifted) gx = (gx.array() + 0.5).cwiseMin(1.0).matrix();
  cls.members.push_back(shifted);

  const OfflineDataset noiseless = sample_dataset(game, behavior, 100, 0.0, 5);
  const FitResult fit = least_squares_fit(cls, noiseless, &game.payoff);
  CHECK(fit.chosen_index == 0);
  CHECK(fit.in_sample_sse == 0.0);
  CHECK(*fit.residual_vs_truth_sse == 0.0);

  const OfflineDataset empty = sample_dataset(game, behavior, 0, 0.0, 5);
  CHECK(least_squares_fit(cls, empty).chosen_index == 0);  // tie broken by lowest index

  CHECK_THROWS_AS(least_squares_fit(FunctionClass{}, noiseless), std::invalid_argument);
}

TEST_CASE("least squares fit attains the class minimum") {
  const GameInstance game = random_game(3, 3, 31);
  const JointPolicy behavior = uniform_behavior(3, 3);
  const FunctionClass cls = build_function_class(game.payoff, 6, 0.4, 99);
  const OfflineDataset data = sample_dataset(game, behavior, 150, 0.5, 8);
  const FitResult fit = least_squares_fit(cls, data);
  for (const PayoffTable& member : cls.members) {
    Scalar sse = 0;
    for (const DataRecord& rec : data.records) {
      const Scalar r = member[rec.x](rec.a1, rec.a2) - rec.p;
      sse += r * r;
    }
    CHECK(fit.in_sample_sse <= sse + 1e-12);
  }
}

TEST_CASE("in-sample residual concentration") {
  // sigma = 0.5, |G| = 8, n = 200: residual_vs_truth_sse <= 8 log(|G|/delta)
  // in at least 1 - delta of 500 trials at delta = 0.1.
  const GameInstance game = random_game(2, 3, 32);
  const JointPolicy behavior = uniform_behavior(2, 3);
  const FunctionClass cls = build_function_class(game.payoff, 8, 0.3, 77);
  const Scalar bound = 8.0 * std::log(8.0 / 0.1);
  long violations = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const OfflineDataset data = sample_dataset(game, behavior, 200, 0.5, 1000 + trial);
    const FitResult fit = least_squares_fit(cls, data, &game.payoff);
    if (*fit.residual_vs_truth_sse > bound) ++violations;
  }
  CHECK(static_cast<Scalar>(violations) / 500.0 <= 0.1 + 3.0 * std::sqrt(0.09 / 500.0));
}

TEST_CASE("d2 divergence") {
  const Index nx = 1, na = 2;
  const JointPolicy behavior = uniform_behavior(nx, na);
  const Vector rho = Vector::Ones(1);

  // Single member: the sup over distinct pairs is empty.
  FunctionClass single;
  single.members.push_back(constant_game(0.0, nx, na).payoff);
  CHECK(d2_divergence(single, behavior, rho, 0, 0, 0) == 0.0);

  // Constant difference: ratio 1 everywhere.
  FunctionClass constant_pair;
  constant_pair.members.push_back(constant_game(0.0, nx, na).payoff);
  constant_pair.members.push_back(constant_game(0.5, nx, na).payoff);
  for (Index a1 = 0; a1 < na; ++a1)
    for (Index a2 = 0; a2 < na; ++a2)
      CHECK(d2_divergence(constant_pair, behavior, rho, 0, a1, a2) ==
            doctest::Approx(1.0).epsilon(1e-14));

  // Difference of 1 at exactly one action pair: 4 there, 0 elsewhere.
  FunctionClass spiked;
  spiked.members.push_back(constant_game(0.0, nx, na).payoff);
  PayoffTable spike = constant_game(0.0, nx, na).payoff;
  spike[0](0, 1) = 1.0;
  spiked.members.push_back(spike);
  CHECK(d2_divergence(spiked, behavior, rho, 0, 0, 1) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(d2_divergence(spiked, behavior, rho, 0, 0, 0) == 0.0);
  CHECK(d2_divergence(spiked, behavior, rho, 0, 1, 0) == 0.0);
  CHECK(d2_divergence(spiked, behavior, rho, 0, 1, 1) == 0.0);
}

TEST_CASE("unilateral concentrability") {
  const Index nx = 1, na = 2;
  const Vector rho = Vector::Ones(1);
  const JointPolicy uniform = uniform_behavior(nx, na);

  // Constant-difference class: divergence 1 pointwise, so the factor is 1.
  FunctionClass constant_pair;
  constant_pair.members.push_back(constant_game(0.0, nx, na).payoff);
  constant_pair.members.push_back(constant_game(0.5, nx, na).payoff);
  CHECK(unilateral_concentrability(constant_pair, uniform, rho, uniform) ==
        doctest::Approx(1.0).epsilon(1e-14));

  // Members that agree on the behavior's support but differ at an unplayed
  // pair: no coverage there, so the factor is infinite.
  FunctionClass spiked;
  spiked.members.push_back(constant_pair.members[0]);
  PayoffTable hidden = constant_pair.members[0];
  hidden[0](1, 1) = 0.9;
  spiked.members.push_back(hidden);
  JointPolicy degenerate{policy_from_rows({{1.0, 0.0}}), policy_from_rows({{1.0, 0.0}})};
  CHECK(std::isinf(unilateral_concentrability(spiked, degenerate, rho, uniform)));
}

TEST_CASE("unilateral concentrability equals the deterministic-deviation maximum") {
  const Index nx = 2, na = 3;
  const GameInstance game = random_game(nx, na, 33);
  const JointPolicy behavior = uniform_behavior(nx, na);
  const FunctionClass cls = build_function_class(game.payoff, 5, 0.4, 44);
  Rng prng(45);
  const JointPolicy nash{random_policy(nx, na, prng), random_policy(nx, na, prng)};

  const PayoffTable d2 = d2_divergence_table(cls, behavior, game.rho);
  // Enumerate every deterministic deviation map (na^nx per player).
  Scalar best = 0;
  for (int player = 1; player <= 2; ++player) {
    const Index combos = static_cast<Index>(std::pow(na, nx));
    for (Index combo = 0; combo < combos; ++combo) {
      Scalar total = 0;
      Index rest = combo;
      for (Index x = 0; x < nx; ++x) {
        const Index dev = rest % na;
        rest /= na;
        Scalar inner = 0;
        for (Index other = 0; other < na; ++other)
          inner += player == 1 ? nash.p2.probs(x, other) * d2[x](dev, other)
                               : nash.p1.probs(x, other) * d2[x](other, dev);
        total += game.rho[x] * inner;
      }
      best = std::max(best, total);
    }
  }
  CHECK(unilateral_concentrability(cls, behavior, game.rho, nash) ==
        doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("pessimistic baseline") {
  const Index nx = 1, na = 2;
  const Vector rho = Vector::Ones(1);
  const JointPolicy behavior = uniform_behavior(nx, na);
  GameInstance game = constant_game(0.0, nx, na);
  game.payoff[0] << 0.8, -0.2, 0.1, 0.4;

  // Singleton class returns its only member regardless of the data.
  FunctionClass single;
  single.members.push_back(game.payoff);
  const OfflineDataset empty = sample_dataset(game, behavior, 0, 0.0, 1);
  const PayoffTable out = pessimistic_fit_baseline(single, empty, 0.1);
  CHECK((out[0] - game.payoff[0]).cwiseAbs().maxCoeff() == 0.0);

  // Enough noiseless data shrinks the version space to the truth alone.
  FunctionClass pair;
  pair.members.push_back(game.payoff);
  PayoffTable far = game.payoff;
  far[0] = (far[0].array() - 0.6).cwiseMax(-1.0).matrix();
  pair.members.push_back(far);
  const OfflineDataset big = sample_dataset(game, behavior, 2000, 0.0, 2);
  const PayoffTable lower = pessimistic_fit_baseline(pair, big, 0.1);
  CHECK((lower[0] - game.payoff[0]).cwiseAbs().maxCoeff() == 0.0);

  // Two members differing only at an unsampled triple: entrywise minimum there.
  FunctionClass unsampled = pair;
  unsampled.members[1] = game.payoff;
  unsampled.members[1][0](1, 1) = -0.9;  // only (a1=1, a2=1) differs
  JointPolicy corner{policy_from_rows({{1.0, 0.0}}), policy_from_rows({{1.0, 0.0}})};
  const OfflineDataset corner_data = sample_dataset(game, corner, 500, 0.0, 3);
  const PayoffTable low2 = pessimistic_fit_baseline(unsampled, corner_data, 0.1);
  CHECK(low2[0](1, 1) == -0.9);
  CHECK(low2[0](0, 0) == game.payoff[0](0, 0));

  CHECK_THROWS_AS(pessimistic_fit_baseline(pair, big, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(pessimistic_fit_baseline(pair, big, 1.0), std::invalid_argument);
}

TEST_CASE("mean squared error matches loop evaluation") {
  const GameInstance game = random_game(3, 3, 50);
  const FunctionClass cls = build_function_class(game.payoff, 3, 0.4, 51);
  Rng prng(52);
  const JointPolicy behavior{random_policy(3, 3, prng), random_policy(3, 3, prng)};
  const PayoffTable& other = cls.members[1];
  Scalar expected = 0;
  for (Index x = 0; x < 3; ++x)
    for (Index a1 = 0; a1 < 3; ++a1)
      for (Index a2 = 0; a2 < 3; ++a2) {
        const Scalar d = other[x](a1, a2) - game.payoff[x](a1, a2);
        expected += game.rho[x] * behavior.p1.probs(x, a1) * behavior.p2.probs(x, a2) * d * d;
      }
  CHECK(mean_squared_error(other, game.payoff, game.rho, behavior) ==
        doctest::Approx(expected).epsilon(1e-13));
}
