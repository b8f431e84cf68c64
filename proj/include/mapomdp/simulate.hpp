#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "mapomdp/pomdp.hpp"

namespace mapomdp {

using BeliefPolicy = std::function<std::size_t(const Belief&)>;

struct TrajectoryStep {
  std::size_t state = 0;       // hidden state the step departed from
  std::size_t action = 0;
  Signal signal;
  double reward = 0.0;         // normalized units
  std::size_t next_state = 0;
};

namespace detail {

inline std::size_t sample_index(std::mt19937_64& rng, const double* weights, std::size_t count) {
  double total = 0.0;
  for (std::size_t i = 0; i < count; ++i) total += weights[i];
  const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    acc += weights[i];
    if (u < acc) return i;
  }
  return last_positive;
}

}  // namespace detail

/// Simulates the hidden process under a belief-feedback policy. Deterministic given the seed.
inline std::vector<TrajectoryStep> sample_trajectory(const Pomdp& model, const Belief& b, const BeliefPolicy& policy,
                                                     std::size_t horizon, std::uint64_t seed) {
  std::vector<TrajectoryStep> out;
  if (horizon == 0) return out;
  validate_belief(model, b);
  out.reserve(horizon);
  std::mt19937_64 rng(seed);
  const std::size_t n = model.num_states();
  std::size_t state = detail::sample_index(rng, b.data(), n);
  Belief belief = b;
  std::vector<double> row(n);
  for (std::size_t t = 0; t < horizon; ++t) {
    const std::size_t action = policy(belief);
    for (std::size_t j = 0; j < n; ++j) row[j] = model.transition(state, action, j);
    const std::size_t next = detail::sample_index(rng, row.data(), n);
    const double* dist = &model.data().signal_kernel[model.kernel_offset(state, action, next)];
    const std::size_t z = detail::sample_index(rng, dist, model.num_signals());
    out.push_back({state, action, model.signal_at(z), model.signal_reward(z), next});
    auto filtered = belief_update(model, belief, action, z);
    if (filtered.posterior) belief = std::move(*filtered.posterior);
    state = next;
  }
  return out;
}

/// Mean discounted normalized return over `episodes` simulated runs.
inline double monte_carlo_return(const Pomdp& model, const Belief& b, const BeliefPolicy& policy, std::size_t horizon,
                                 std::size_t episodes, std::uint64_t seed) {
  if (episodes == 0) return 0.0;
  std::seed_seq seq{seed};
  std::vector<std::uint64_t> seeds(episodes);
  seq.generate(seeds.begin(), seeds.end());
  double total = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    double discount = 1.0, ret = 0.0;
    for (const auto& step : sample_trajectory(model, b, policy, horizon, seeds[e])) {
      ret += discount * step.reward;
      discount *= model.discount();
    }
    total += ret;
  }
  return total / static_cast<double>(episodes);
}

}  // namespace mapomdp
