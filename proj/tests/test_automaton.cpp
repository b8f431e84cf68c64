#include <random>
#include <string>

#include <gtest/gtest.h>

#include "mapomdp/automaton.hpp"
#include "mapomdp/models.hpp"

using namespace mapomdp;

namespace {

std::vector<std::string> all_strings(const std::string& alphabet, std::size_t max_len) {
  std::vector<std::string> out{""};
  std::vector<std::string> layer{""};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::string> next;
    for (const auto& w : layer)
      for (char c : alphabet) next.push_back(w + c);
    out.insert(out.end(), next.begin(), next.end());
    layer = std::move(next);
  }
  return out;
}

}  // namespace

TEST(ContainsAb, ExamplesFromTheFigure) {
  const auto ma = contains_ab_automaton();
  EXPECT_EQ(ma.evaluate("cabd"), 1.0);
  EXPECT_EQ(ma.evaluate("ba"), 0.0);
  EXPECT_EQ(ma.evaluate("aab"), 1.0);
  EXPECT_EQ(ma.evaluate(""), 0.0);
}

TEST(ContainsAb, AgreesWithSubstringSearchUpToLengthFive) {
  const auto ma = contains_ab_automaton();
  const auto words = all_strings("abcd", 5);
  std::size_t mismatches = 0;
  for (const auto& w : words) {
    const double expected = w.find("ab") != std::string::npos ? 1.0 : 0.0;
    if (ma.evaluate(w) != expected) ++mismatches;
  }
  EXPECT_EQ(words.size(), 1365u);  // including the empty word
  EXPECT_EQ(mismatches, 0u);
}

TEST(ContainsAb, UnknownSymbolThrows) { EXPECT_THROW(contains_ab_automaton().evaluate("abx"), std::out_of_range); }

TEST(Automaton, RejectsMismatchedDimensions) {
  EXPECT_THROW(MultiplicityAutomaton({"a"}, {Eigen::MatrixXd::Identity(2, 2)}, Eigen::VectorXd::Ones(3),
                                     Eigen::VectorXd::Ones(3)),
               ValidationError);
  EXPECT_THROW(MultiplicityAutomaton({"a", "b"}, {Eigen::MatrixXd::Identity(2, 2)}, Eigen::VectorXd::Ones(2),
                                     Eigen::VectorXd::Ones(2)),
               ValidationError);
}

TEST(Automaton, EmptyWordIsInitialDotTerminal) {
  const Pomdp m = models::random_pomdp(8, {});
  const auto ma = from_pomdp(m);
  EXPECT_NEAR(ma.evaluate(std::vector<std::size_t>{}), 1.0, 1e-15);
}

TEST(Automaton, MatchesFilterOnRandomModels) {
  std::mt19937_64 rng(17);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Pomdp m = models::random_pomdp(seed, {.states = 4, .actions = 2, .observations = 2, .rewards = 2});
    const auto ma = from_pomdp(m);
    for (const mapomdp::Test& t : enumerate_tests(m, 3)) {
      const auto word = test_symbols(m, t);
      EXPECT_NEAR(ma.evaluate(word), sequence_probability(m, m.initial_belief(), t), 1e-12);
    }
  }
}

TEST(Automaton, ColumnEqualsForwardFromEveryState) {
  const Pomdp m = models::random_pomdp(3, {.states = 5, .actions = 2, .observations = 2, .rewards = 2});
  const auto ma = from_pomdp(m);
  const std::vector<std::size_t> word{1, 6, 3, 0};
  const Eigen::VectorXd col = ma.column(word);
  for (std::size_t s = 0; s < m.num_states(); ++s)
    EXPECT_NEAR(col(static_cast<Eigen::Index>(s)), ma.weigh(point_mass(m.num_states(), s), word), 1e-14);
  EXPECT_NEAR(ma.evaluate(word), (ma.initial().transpose() * ma.word_matrix(word) * ma.terminal())(0), 1e-14);
}

TEST(Automaton, MultiplicativeOverConcatenation) {
  const Pomdp m = models::random_pomdp(12, {.states = 3, .actions = 2, .observations = 2, .rewards = 2});
  const auto ma = from_pomdp(m);
  const std::vector<std::size_t> u{2, 5}, v{7, 1, 0};
  std::vector<std::size_t> uv = u;
  uv.insert(uv.end(), v.begin(), v.end());
  EXPECT_LT((ma.word_matrix(uv) - ma.word_matrix(u) * ma.word_matrix(v)).lpNorm<Eigen::Infinity>(), 1e-15);
}

TEST(Automaton, SymbolNamesFollowModelOrder) {
  const Pomdp tiger = models::tiger();
  const auto ma = from_pomdp(tiger);
  EXPECT_EQ(ma.alphabet_size(), 3u * 2u * 3u);
  EXPECT_EQ(ma.symbol("listen/hear-right/1"), tiger.symbol_index({0, {1, 1}}));
}

TEST(Hankel, RankOfSimpleModels) {
  EXPECT_EQ(hankel_rank(models::fair_coin(), 2), 1u);
  EXPECT_EQ(hankel_rank(models::tiger(), 3), 2u);
  EXPECT_LE(hankel_rank(models::duplicated_states(), 3), 3u);
  EXPECT_EQ(hankel_rank(models::fully_observable(3), 2), 3u);
}

TEST(Hankel, SubmatrixByFilterMatchesAutomaton) {
  const Pomdp m = models::random_pomdp(30, {.states = 3, .actions = 2, .observations = 2, .rewards = 1});
  const auto ma = from_pomdp(m);
  const auto tests = enumerate_tests(m, 2);
  const auto h = hankel_submatrix(m, state_corners(m), tests);
  for (std::size_t j = 0; j < tests.size(); ++j) {
    const Eigen::VectorXd col = ma.column(test_symbols(m, tests[j]));
    for (std::size_t s = 0; s < m.num_states(); ++s)
      EXPECT_NEAR(h.values(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)), col(static_cast<Eigen::Index>(s)),
                  1e-14);
  }
}

TEST(Automaton, JsonDumpHasAllMatrices) {
  const auto j = to_json(contains_ab_automaton());
  EXPECT_EQ(j["size"], 3);
  EXPECT_EQ(j["mu"].size(), 4u);
  EXPECT_EQ(j["terminal"][2], 1.0);
}
