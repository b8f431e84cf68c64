#include <random>

#include <gtest/gtest.h>

#include "mapomdp/model_io.hpp"
#include "mapomdp/models.hpp"
#include "mapomdp/pomdp.hpp"
#include "mapomdp/simulate.hpp"

using namespace mapomdp;

namespace {

Belief random_belief(std::mt19937_64& rng, std::size_t n) {
  std::exponential_distribution<double> e(1.0);
  Belief b(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = e(rng);
  return b / b.sum();
}

mapomdp::Test random_test(std::mt19937_64& rng, const Pomdp& m, std::size_t len) {
  std::uniform_int_distribution<std::size_t> sym(0, m.num_symbols() - 1);
  mapomdp::Test t;
  for (std::size_t i = 0; i < len; ++i) t.push_back(m.step_at(sym(rng)));
  return t;
}

}  // namespace

TEST(Pomdp, TigerListenFilter) {
  const Pomdp tiger = models::tiger();
  const Belief b = tiger.initial_belief();
  const std::size_t listen = 0;
  // Rewards sort as -100, -1, 10, so the listening penalty is reward index 1.
  const Signal hear_left{0, 1};
  auto r = belief_update(tiger, b, listen, hear_left);
  ASSERT_TRUE(r.posterior);
  EXPECT_NEAR(r.probability, 0.5, 1e-12);
  EXPECT_NEAR((*r.posterior)(0), 0.85, 1e-12);
  EXPECT_NEAR((*r.posterior)(1), 0.15, 1e-12);

  auto again = belief_update(tiger, *r.posterior, listen, hear_left);
  EXPECT_NEAR(again.probability, 0.85 * 0.85 + 0.15 * 0.15, 1e-12);
  EXPECT_NEAR((*again.posterior)(0), 0.85 * 0.85 / (0.85 * 0.85 + 0.15 * 0.15), 1e-12);
}

TEST(Pomdp, ImpossibleSignalHasNoPosterior) {
  const Pomdp tiger = models::tiger();
  // Listening never pays the door rewards.
  const Signal impossible{0, 2};
  auto r = belief_update(tiger, tiger.initial_belief(), 0, impossible);
  EXPECT_EQ(r.probability, 0.0);
  EXPECT_FALSE(r.posterior);
}

TEST(Pomdp, EmptyTestHasProbabilityOne) {
  const Pomdp m = models::random_pomdp(3, {});
  EXPECT_DOUBLE_EQ(sequence_probability(m, m.initial_belief(), mapomdp::Test{}), 1.0);
}

TEST(Pomdp, SingleStateModelKeepsPointMass) {
  const Pomdp coin = models::fair_coin();
  for (std::size_t z = 0; z < coin.num_signals(); ++z) {
    auto r = belief_update(coin, coin.initial_belief(), 0, z);
    if (!r.posterior) continue;
    EXPECT_NEAR((*r.posterior)(0), 1.0, 1e-15);
  }
}

TEST(Pomdp, SignalProbabilitiesSumToOne) {
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Pomdp m = models::random_pomdp(seed, {.states = 4, .actions = 3, .observations = 3, .rewards = 2});
    const Belief b = random_belief(rng, m.num_states());
    for (std::size_t a = 0; a < m.num_actions(); ++a) {
      double total = 0.0;
      for (std::size_t z = 0; z < m.num_signals(); ++z) total += belief_update(m, b, a, z).probability;
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Pomdp, FilterMatchesBayesByHand) {
  const Pomdp m = models::random_pomdp(11, {.states = 3, .actions = 2, .observations = 2, .rewards = 2});
  std::mt19937_64 rng(1);
  const Belief b = random_belief(rng, 3);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t z = 0; z < m.num_signals(); ++z) {
      Belief joint = Belief::Zero(3);
      for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t t = 0; t < 3; ++t) joint(t) += b(s) * m.transition(s, a, t) * m.signal_probability(s, a, t, z);
      auto r = belief_update(m, b, a, z);
      EXPECT_NEAR(r.probability, joint.sum(), 1e-14);
      if (r.posterior) EXPECT_LT((*r.posterior - joint / joint.sum()).lpNorm<Eigen::Infinity>(), 1e-14);
    }
}

TEST(Pomdp, ChainRuleAndLinearity) {
  std::mt19937_64 rng(9);
  const Pomdp m = models::random_pomdp(2, {.states = 5, .actions = 2, .observations = 3, .rewards = 2});
  for (int trial = 0; trial < 50; ++trial) {
    const mapomdp::Test u = random_test(rng, m, 2), v = random_test(rng, m, 2);
    mapomdp::Test uv = u;
    uv.insert(uv.end(), v.begin(), v.end());
    const Belief x = random_belief(rng, 5), y = random_belief(rng, 5);
    const double pu = sequence_probability(m, x, u);
    if (pu > 0.0) {
      Belief after = x;
      for (const Step& s : u) after = *belief_update(m, after, s.action, s.signal).posterior;
      EXPECT_NEAR(sequence_probability(m, x, uv), pu * sequence_probability(m, after, v), 1e-12);
    }
    const double lambda = std::uniform_real_distribution<double>(0, 1)(rng);
    const Belief mix = lambda * x + (1 - lambda) * y;
    EXPECT_NEAR(sequence_probability(m, mix, uv),
                lambda * sequence_probability(m, x, uv) + (1 - lambda) * sequence_probability(m, y, uv), 1e-12);
  }
}

TEST(Pomdp, EnumerateTestsCountsAndOrder) {
  const Pomdp coin = models::fair_coin();
  // |A|=1, |Z| = 2 observations * 2 rewards = 4
  const auto tests = enumerate_tests(coin, 3);
  EXPECT_EQ(tests.size(), 1u + 4u + 16u + 64u);
  EXPECT_TRUE(tests.front().empty());
  for (std::size_t i = 1; i < tests.size(); ++i) EXPECT_LE(tests[i - 1].size(), tests[i].size());
  EXPECT_EQ(test_symbols(coin, tests[5]), (std::vector<std::size_t>{0, 0}));
}

TEST(Pomdp, SymbolIndexRoundTrip) {
  const Pomdp m = models::random_pomdp(1, {.states = 2, .actions = 3, .observations = 2, .rewards = 2});
  for (std::size_t sym = 0; sym < m.num_symbols(); ++sym) EXPECT_EQ(m.symbol_index(m.step_at(sym)), sym);
}

TEST(Pomdp, RejectsInvalidData) {
  PomdpData d = models::fully_observable(2).data();
  d.discount = 1.0;
  EXPECT_THROW(Pomdp{d}, ValidationError);
  d = models::fully_observable(2).data();
  d.transition[0](0, 0) = 0.5;
  EXPECT_THROW(Pomdp{d}, ValidationError);
  d = models::fully_observable(2).data();
  d.initial_belief(0) = 0.7;
  EXPECT_THROW(Pomdp{d}, ValidationError);
  d = models::fully_observable(2).data();
  d.reward_values[1] = 1.5;
  EXPECT_THROW(Pomdp{d}, ValidationError);
}

TEST(Pomdp, BeliefValidation) {
  const Pomdp m = models::tiger();
  EXPECT_NO_THROW(validate_belief(m, point_mass(2, 1)));
  Belief bad(2);
  bad << 0.6, 0.6;
  EXPECT_THROW(validate_belief(m, bad), ValidationError);
  EXPECT_THROW(validate_belief(m, Belief::Constant(3, 1.0 / 3)), ValidationError);
}

TEST(Pomdp, SanitizeDistributionClampsTinyNegatives) {
  Belief b(3);
  b << -1e-14, 0.5, 0.5;
  sanitize_distribution(b);
  EXPECT_EQ(b(0), 0.0);
  b << -1e-6, 0.5, 0.5;
  EXPECT_THROW(sanitize_distribution(b), ValidationError);
}

TEST(ModelJson, RoundTripIsExact) {
  const Pomdp m = models::random_pomdp(21, {.states = 3, .actions = 2, .observations = 2, .rewards = 3});
  const auto j = to_json(m);
  const Pomdp back = model_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(to_json(back).dump(), j.dump());
}

TEST(Simulate, SeededTrajectoriesRepeat) {
  const Pomdp tiger = models::tiger();
  const BeliefPolicy listen = [](const Belief&) { return std::size_t{0}; };
  const auto a = sample_trajectory(tiger, tiger.initial_belief(), listen, 30, 42);
  const auto b = sample_trajectory(tiger, tiger.initial_belief(), listen, 30, 42);
  ASSERT_EQ(a.size(), 30u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].state, b[i].state);
    EXPECT_EQ(a[i].signal.observation, b[i].signal.observation);
    EXPECT_EQ(a[i].state, a[i].next_state);
  }
}

TEST(Simulate, MonteCarloMatchesGeometricSeries) {
  const Pomdp coin = models::fair_coin();
  const BeliefPolicy flip = [](const Belief&) { return std::size_t{0}; };
  const double estimate = monte_carlo_return(coin, coin.initial_belief(), flip, 80, 4000, 3);
  // 0.5 per step, discount 0.9
  EXPECT_NEAR(estimate, 0.5 / (1 - 0.9), 0.15);
}
