#pragma once

// Brute-force finite-horizon expectimax on the exact belief MDP. Ground truth
// for small models: V*(b) lies in [V_H(b), V_H(b) + gamma^(H+1) / (1 - gamma)].

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "mapomdp/errors.hpp"
#include "mapomdp/pomdp.hpp"

namespace mapomdp {

inline double truncation_slack(double discount, std::size_t horizon) {
  return std::pow(discount, static_cast<double>(horizon + 1)) / (1.0 - discount);
}

/// Smallest H whose truncation slack is at most `slack`.
inline std::size_t horizon_for_slack(double discount, double slack) {
  if (!(slack > 0.0)) throw ValidationError("oracle slack must be positive");
  if (discount <= 0.0) return 0;
  std::size_t h = 0;
  while (truncation_slack(discount, h) > slack) ++h;
  return h;
}

struct OracleConfig {
  bool memoize = true;
  double quantum = 1e-9;              // belief coordinates are rounded to this for memo keys
  std::size_t node_budget = 100000000;  // distinct (belief, depth) expansions
};

struct OracleValue {
  double value = 0.0;
  std::size_t action = 0;
};

using DepthPolicy = std::function<std::size_t(const Belief&, std::size_t depth)>;

class ExactOracle {
 public:
  explicit ExactOracle(const Pomdp& model, OracleConfig cfg = {}) : model_(model), cfg_(cfg) {}

  /// V_H*(b) and its maximizing first action (lowest index on ties).
  OracleValue value(const Belief& b, std::size_t horizon) {
    validate_belief(model_, b);
    return optimal(b, horizon);
  }

  double q(const Belief& b, std::size_t action, std::size_t horizon) {
    validate_belief(model_, b);
    if (action >= model_.num_actions()) throw ValidationError("action index out of range");
    return backup(b, action, horizon, [this](const Belief& next, std::size_t d) { return optimal(next, d).value; });
  }

  /// The same recursion with the max replaced by the policy's choice. The
  /// policy sees the belief and the number of remaining steps after this one.
  double evaluate(const DepthPolicy& policy, const Belief& b, std::size_t horizon) {
    validate_belief(model_, b);
    policy_memo_.clear();
    return follow(policy, b, horizon);
  }

  std::size_t expanded_nodes() const noexcept { return expansions_; }

 private:
  struct Key {
    std::vector<std::int64_t> coords;
    std::size_t depth;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      std::uint64_t h = 1469598103934665603ULL ^ k.depth;
      for (std::int64_t c : k.coords) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 1099511628211ULL;
      }
      return static_cast<std::size_t>(h);
    }
  };

  Key key(const Belief& b, std::size_t depth) const {
    Key k{std::vector<std::int64_t>(static_cast<std::size_t>(b.size())), depth};
    for (Eigen::Index i = 0; i < b.size(); ++i) k.coords[static_cast<std::size_t>(i)] = std::llround(b(i) / cfg_.quantum);
    return k;
  }

  void charge() {
    if (++expansions_ > cfg_.node_budget)
      throw BudgetError("oracle node budget of " + std::to_string(cfg_.node_budget) +
                        " exceeded; lower the horizon or raise the oracle slack");
  }

  template <class Continue>
  double backup(const Belief& b, std::size_t action, std::size_t depth, Continue&& next_value) {
    double total = b.dot(model_.expected_reward(action));
    if (depth == 0) return total;
    double future = 0.0;
    for (std::size_t z = 0; z < model_.num_signals(); ++z) {
      FilterResult step = belief_update(model_, b, action, z);
      if (!step.posterior) continue;
      future += step.probability * next_value(*step.posterior, depth - 1);
    }
    return total + model_.discount() * future;
  }

  OracleValue optimal(const Belief& b, std::size_t depth) {
    Key k;
    if (cfg_.memoize) {
      k = key(b, depth);
      if (auto it = memo_.find(k); it != memo_.end()) return it->second;
    }
    charge();
    OracleValue best{-std::numeric_limits<double>::infinity(), 0};
    for (std::size_t a = 0; a < model_.num_actions(); ++a) {
      const double v = backup(b, a, depth, [this](const Belief& next, std::size_t d) { return optimal(next, d).value; });
      if (v > best.value) best = {v, a};
    }
    if (cfg_.memoize) memo_.emplace(std::move(k), best);
    return best;
  }

  double follow(const DepthPolicy& policy, const Belief& b, std::size_t depth) {
    Key k;
    if (cfg_.memoize) {
      k = key(b, depth);
      if (auto it = policy_memo_.find(k); it != policy_memo_.end()) return it->second;
    }
    charge();
    const std::size_t a = policy(b, depth);
    if (a >= model_.num_actions()) throw ValidationError("policy returned an invalid action");
    const double v = backup(b, a, depth, [&](const Belief& next, std::size_t d) { return follow(policy, next, d); });
    if (cfg_.memoize) policy_memo_.emplace(std::move(k), v);
    return v;
  }

  const Pomdp& model_;
  OracleConfig cfg_;
  std::size_t expansions_ = 0;
  std::unordered_map<Key, OracleValue, KeyHash> memo_;
  std::unordered_map<Key, double, KeyHash> policy_memo_;
};

inline OracleValue exact_value(const Pomdp& model, const Belief& b, std::size_t horizon, const OracleConfig& cfg = {}) {
  return ExactOracle(model, cfg).value(b, horizon);
}

inline double exact_q(const Pomdp& model, const Belief& b, std::size_t action, std::size_t horizon,
                      const OracleConfig& cfg = {}) {
  return ExactOracle(model, cfg).q(b, action, horizon);
}

inline double evaluate_policy(const Pomdp& model, const std::function<std::size_t(const Belief&)>& policy,
                              const Belief& b, std::size_t horizon, const OracleConfig& cfg = {}) {
  return ExactOracle(model, cfg).evaluate([&](const Belief& x, std::size_t) { return policy(x); }, b, horizon);
}

}  // namespace mapomdp
