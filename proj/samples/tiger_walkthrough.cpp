// Plans on the tiger problem with the rank planner, then follows the policy
// for a few simulated steps, printing the belief and chosen action.

#include <cstdio>

#include <mapomdp.hpp>

int main(int argc, char** argv) {
  using namespace mapomdp;
  const Pomdp model = argc > 1 ? load_pomdp(argv[1]) : models::tiger(0.75);
  const RankPlan plan = mapomdp::plan(model, 0.1, 1e-4);

  std::printf("rank %zu, %zu grid states, value at start %.4f\n", plan.grid.rank, plan.grid.states.size(),
              plan.result.values[plan.grid.initial]);
  for (std::size_t i = 0; i < plan.spanner.decomposition.rank(); ++i)
    std::printf("  basis state %s with test %s\n",
                model.data().states[plan.spanner.decomposition.basis_states()[i]].c_str(),
                describe_test(model, plan.spanner.decomposition.core_tests()[i]).c_str());

  const BeliefPolicy policy = [&](const Belief& b) { return act(plan, b); };
  Belief belief = model.initial_belief();
  for (const TrajectoryStep& step : sample_trajectory(model, belief, policy, 8, 7)) {
    std::printf("belief [");
    for (Eigen::Index i = 0; i < belief.size(); ++i) std::printf(i ? " %.3f" : "%.3f", belief(i));
    std::printf("] -> %-10s sees %-10s reward %+.1f\n", model.data().actions[step.action].c_str(),
                model.data().observations[step.signal.observation].c_str(), model.raw_reward(step.reward));
    belief = *belief_update(model, belief, step.action, step.signal).posterior;
  }
}
