#include <random>

#include <gtest/gtest.h>

#include "mapomdp/baseline_grid.hpp"
#include "mapomdp/models.hpp"

using namespace mapomdp;

TEST(SimplexRounding, LargestRemainder) {
  EXPECT_EQ(round_to_simplex(Eigen::Vector2d(0.5, 0.5), 2), (SimplexGridState{1, 1}));
  EXPECT_EQ(round_to_simplex(Eigen::Vector3d(1.0 / 3, 1.0 / 3, 1.0 / 3), 2), (SimplexGridState{1, 1, 0}));
  EXPECT_EQ(round_to_simplex(Eigen::Vector3d(0.1, 0.25, 0.65), 4), (SimplexGridState{0, 1, 3}));
  EXPECT_EQ(round_to_simplex(Eigen::Vector3d(0.3, 0.3, 0.4), 10), (SimplexGridState{3, 3, 4}));
}

TEST(SimplexRounding, StaysOnLatticeAndClose) {
  std::mt19937_64 rng(2);
  std::exponential_distribution<double> e(1.0);
  for (int trial = 0; trial < 500; ++trial) {
    Eigen::VectorXd b(5);
    for (int i = 0; i < 5; ++i) b(i) = e(rng);
    b /= b.sum();
    const int k = 1 + trial % 20;
    const auto g = round_to_simplex(b, k);
    int sum = 0;
    for (int m : g) {
      EXPECT_GE(m, 0);
      sum += m;
    }
    EXPECT_EQ(sum, k);
    EXPECT_LT((simplex_belief(g, k) - b).lpNorm<Eigen::Infinity>(), 1.0 / k + 1e-12);
  }
}

TEST(SimplexGrid, ResolutionMustBeIntegral) {
  EXPECT_EQ(simplex_resolution(0.05), 20);
  EXPECT_EQ(simplex_resolution(1.0), 1);
  EXPECT_THROW(simplex_resolution(0.3), ValidationError);
  EXPECT_THROW(simplex_resolution(0.0), ValidationError);
  EXPECT_THROW(build_delta_grid(models::tiger(), 0.3), ValidationError);
}

TEST(SimplexGrid, SingleStateModelHasOneGridState) {
  for (double delta : {1.0, 0.5, 0.05}) {
    const auto g = build_delta_grid(models::fair_coin(), delta);
    EXPECT_EQ(g.states.size(), 1u);
    const auto r = solve_baseline(g, 1e-6);
    EXPECT_NEAR(r.values[0], 0.5 / (1 - 0.9), 1e-6);
  }
}

TEST(SimplexGrid, UnitDeltaGivesCorners) {
  GridOptions full;
  full.mode = GridMode::full;
  const auto g = build_delta_grid(models::duplicated_states(), 1.0, full);
  EXPECT_EQ(g.states.size(), 4u);
  for (const auto& s : g.states) EXPECT_EQ(std::count(s.begin(), s.end(), 1), 1);
  EXPECT_EQ(build_delta_grid(models::fully_observable(2), 1.0).states.size(), 2u);
}

TEST(SimplexGrid, FullModeCountsLatticePoints) {
  GridOptions full;
  full.mode = GridMode::full;
  EXPECT_EQ(build_delta_grid(models::tiger(), 0.05, full).states.size(), 21u);
  EXPECT_EQ(build_delta_grid(models::duplicated_states(), 0.25, full).states.size(), simplex_lattice_size(4, 4));
  EXPECT_EQ(simplex_lattice_size(4, 4), 35u);
  full.state_cap = 20;
  EXPECT_THROW(build_delta_grid(models::tiger(), 0.05, full), BudgetError);
}

TEST(SimplexGrid, FullyObservableCornersMatchExactMdp) {
  const std::size_t n = 3;
  const double gamma = 0.75;
  const Pomdp m = models::fully_observable(n, gamma);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  for (int it = 0; it < 2000; ++it) {
    Eigen::VectorXd next(n);
    for (std::size_t s = 0; s < n; ++s) {
      double best = 0.0;
      for (std::size_t a = 0; a < 2; ++a) {
        double q = 0.0;
        for (std::size_t t = 0; t < n; ++t)
          q += m.transition(s, a, t) * ((t == n - 1 ? 1.0 : 0.0) + gamma * v(static_cast<Eigen::Index>(t)));
        best = std::max(best, q);
      }
      next(static_cast<Eigen::Index>(s)) = best;
    }
    v = next;
  }
  const double vi_tol = 1e-6;
  const auto g = build_delta_grid(m, 0.1);
  const auto r = solve_baseline(g, vi_tol);
  for (std::size_t s = 0; s < n; ++s) {
    const auto idx = g.find(round_to_simplex(point_mass(n, s), g.resolution));
    ASSERT_TRUE(idx.has_value());
    EXPECT_NEAR(r.values[*idx], v(static_cast<Eigen::Index>(s)), vi_tol);
  }
}

TEST(SimplexGrid, TigerPolicyShape) {
  const auto g = build_delta_grid(models::tiger(), 0.05);
  const auto r = solve_baseline(g, 1e-4);
  EXPECT_EQ(act_baseline(g, r, Eigen::Vector2d(0.5, 0.5)), 0u);
  EXPECT_EQ(act_baseline(g, r, Eigen::Vector2d(0.0, 1.0)), 1u);
  EXPECT_EQ(act_baseline(g, r, Eigen::Vector2d(1.0, 0.0)), 2u);
  const auto j = to_json(g, r, models::tiger().data().actions);
  EXPECT_EQ(j["states"].size(), g.states.size());
  EXPECT_EQ(j["states"][0]["lattice"].size(), 2u);
}
