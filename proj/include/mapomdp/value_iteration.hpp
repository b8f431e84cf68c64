#pragma once

// Finite discounted MDPs in compressed-row form and value iteration.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace mapomdp {

struct Transition {
  std::size_t next = 0;
  double probability = 0.0;
};

/// Rows are (state, action) pairs in state-major order.
class FiniteMdp {
 public:
  FiniteMdp(std::size_t num_actions, double discount) : num_actions_(num_actions), discount_(discount) {
    row_begin_.push_back(0);
  }

  /// Appends the row for the next (state, action) pair.
  void add_row(double reward, const std::vector<Transition>& successors) {
    rewards_.push_back(reward);
    transitions_.insert(transitions_.end(), successors.begin(), successors.end());
    row_begin_.push_back(transitions_.size());
  }

  std::size_t num_states() const noexcept { return rewards_.size() / num_actions_; }
  std::size_t num_actions() const noexcept { return num_actions_; }
  double discount() const noexcept { return discount_; }
  double reward(std::size_t s, std::size_t a) const { return rewards_[s * num_actions_ + a]; }

  struct RowView {
    const Transition* first;
    const Transition* last;
    const Transition* begin() const { return first; }
    const Transition* end() const { return last; }
  };
  RowView successors(std::size_t s, std::size_t a) const {
    const std::size_t row = s * num_actions_ + a;
    return {transitions_.data() + row_begin_[row], transitions_.data() + row_begin_[row + 1]};
  }

  double q_value(const std::vector<double>& values, std::size_t s, std::size_t a) const {
    double future = 0.0;
    for (const auto& t : successors(s, a)) future += t.probability * values[t.next];
    return reward(s, a) + discount_ * future;
  }

 private:
  std::size_t num_actions_;
  double discount_;
  std::vector<double> rewards_;
  std::vector<std::size_t> row_begin_;
  std::vector<Transition> transitions_;
};

struct PlanResult {
  std::vector<double> values;
  std::vector<std::size_t> policy;
  double residual = 0.0;
  std::size_t iterations = 0;
  // Free-form numeric metadata (sizes, meshes, timings in seconds).
  std::map<std::string, double> metadata;
};

/// Jacobi value iteration until the Bellman residual is at most
/// vi_tol * (1 - gamma) / (2 gamma), which makes the greedy policy
/// vi_tol-optimal for the finite MDP. Ties pick the lowest action index.
inline PlanResult solve_mdp(const FiniteMdp& mdp, double vi_tol, std::size_t max_iterations = 1000000) {
  const std::size_t ns = mdp.num_states();
  const double gamma = mdp.discount();
  const double stop = vi_tol * (1.0 - gamma) / (2.0 * gamma);
  PlanResult out;
  std::vector<double> values(ns, 0.0), next(ns, 0.0);
  double residual = 0.0;
  std::size_t it = 0;
  for (; it < max_iterations; ++it) {
    residual = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < mdp.num_actions(); ++a) best = std::max(best, mdp.q_value(values, s, a));
      next[s] = best;
      residual = std::max(residual, std::abs(best - values[s]));
    }
    values.swap(next);
    if (residual <= stop) {
      ++it;
      break;
    }
  }
  if (residual > stop) throw std::runtime_error("value iteration did not converge within the iteration cap");
  out.policy.resize(ns);
  for (std::size_t s = 0; s < ns; ++s) {
    std::size_t best_a = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
      const double q = mdp.q_value(values, s, a);
      if (q > best + 1e-15) {
        best = q;
        best_a = a;
      }
    }
    out.policy[s] = best_a;
  }
  out.values = std::move(values);
  out.residual = residual;
  out.iterations = it;
  return out;
}

}  // namespace mapomdp
