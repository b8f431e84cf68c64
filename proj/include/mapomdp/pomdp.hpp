#pragma once

// Finite POMDP model, Bayesian filtering and direct test probabilities.
//
// Signals are (observation, reward-value) pairs. The signal kernel is
// conditioned on the full transition (s, a, s') so that file formats whose
// rewards depend on the departing state are represented exactly:
//
//   joint(a, z)(i, j) = P(s_i, a, s_j) * OB(z | s_i, a, s_j)
//
// which is the one-step matrix P(s_j, z | s_i, a) of the equivalent
// multiplicity automaton.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mapomdp/errors.hpp"

namespace mapomdp {

using Belief = Eigen::VectorXd;

struct Signal {
  std::size_t observation = 0;
  std::size_t reward = 0;  // index into reward_values

  friend bool operator==(const Signal&, const Signal&) = default;
};

struct Step {
  std::size_t action = 0;
  Signal signal;

  friend bool operator==(const Step&, const Step&) = default;
};

/// Sequence of (action, signal) pairs. The empty test always succeeds.
using Test = std::vector<Step>;

/// Plain model data. `Pomdp` validates it and derives the per-symbol matrices.
struct PomdpData {
  std::vector<std::string> states;
  std::vector<std::string> actions;
  std::vector<std::string> observations;
  std::vector<double> reward_values;  // normalized into [0,1], ascending
  std::vector<Eigen::MatrixXd> transition;  // transition[a](s, s')
  // OB(z | s, a, s') flattened as [a][s][s'][z], z = observation * |R| + reward.
  std::vector<double> signal_kernel;
  double discount = 0.95;
  Eigen::VectorXd initial_belief;
  // raw = normalized * reward_scale + reward_offset
  double reward_scale = 1.0;
  double reward_offset = 0.0;
};

inline constexpr double kStochasticTolerance = 1e-12;
inline constexpr double kBeliefTolerance = 1e-10;

class Pomdp {
 public:
  explicit Pomdp(PomdpData data) : data_(std::move(data)) {
    validate();
    derive();
  }

  const PomdpData& data() const noexcept { return data_; }

  std::size_t num_states() const noexcept { return data_.states.size(); }
  std::size_t num_actions() const noexcept { return data_.actions.size(); }
  std::size_t num_observations() const noexcept { return data_.observations.size(); }
  std::size_t num_rewards() const noexcept { return data_.reward_values.size(); }
  std::size_t num_signals() const noexcept { return num_observations() * num_rewards(); }
  std::size_t num_symbols() const noexcept { return num_actions() * num_signals(); }
  double discount() const noexcept { return data_.discount; }
  const Belief& initial_belief() const noexcept { return data_.initial_belief; }

  std::size_t signal_index(const Signal& z) const noexcept { return z.observation * num_rewards() + z.reward; }
  Signal signal_at(std::size_t z) const noexcept { return {z / num_rewards(), z % num_rewards()}; }
  std::size_t symbol_index(std::size_t action, std::size_t z) const noexcept { return action * num_signals() + z; }
  std::size_t symbol_index(const Step& step) const noexcept { return symbol_index(step.action, signal_index(step.signal)); }
  Step step_at(std::size_t symbol) const noexcept { return {symbol / num_signals(), signal_at(symbol % num_signals())}; }

  /// Normalized reward carried by signal index z.
  double signal_reward(std::size_t z) const noexcept { return data_.reward_values[z % num_rewards()]; }
  double raw_reward(double normalized) const noexcept { return normalized * data_.reward_scale + data_.reward_offset; }

  double transition(std::size_t s, std::size_t a, std::size_t next) const { return data_.transition[a](s, next); }
  double signal_probability(std::size_t s, std::size_t a, std::size_t next, std::size_t z) const {
    return data_.signal_kernel[kernel_offset(s, a, next) + z];
  }

  /// P(s_j, z | s_i, a) as an n x n matrix.
  const Eigen::MatrixXd& joint(std::size_t action, std::size_t z) const { return joint_[symbol_index(action, z)]; }
  const Eigen::MatrixXd& joint(std::size_t symbol) const { return joint_[symbol]; }

  /// Expected normalized immediate reward of `action` from each departing state.
  const Eigen::VectorXd& expected_reward(std::size_t action) const { return expected_reward_[action]; }

  std::size_t kernel_offset(std::size_t s, std::size_t a, std::size_t next) const noexcept {
    const std::size_t n = num_states();
    return ((a * n + s) * n + next) * num_signals();
  }

 private:
  void validate() const {
    const std::size_t n = num_states();
    if (n == 0) throw ValidationError("model has no states");
    if (num_actions() == 0) throw ValidationError("model has no actions");
    if (num_observations() == 0) throw ValidationError("model has no observations");
    if (num_rewards() == 0) throw ValidationError("model has no reward values");
    if (!(data_.discount > 0.0 && data_.discount < 1.0))
      throw ValidationError("discount must lie strictly inside (0,1), got " + std::to_string(data_.discount));
    for (double r : data_.reward_values)
      if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("reward value outside [0,1]: " + std::to_string(r));
    if (data_.transition.size() != num_actions()) throw ValidationError("transition must have one matrix per action");
    for (std::size_t a = 0; a < num_actions(); ++a) {
      const auto& t = data_.transition[a];
      if (t.rows() != static_cast<Eigen::Index>(n) || t.cols() != static_cast<Eigen::Index>(n))
        throw ValidationError("transition matrix for action '" + data_.actions[a] + "' is not n x n");
      for (std::size_t s = 0; s < n; ++s) {
        if ((t.row(s).array() < 0.0).any())
          throw ValidationError("negative transition probability at (" + data_.states[s] + ", " + data_.actions[a] + ")");
        const double sum = t.row(s).sum();
        if (std::abs(sum - 1.0) > kStochasticTolerance)
          throw ValidationError("transition row (" + data_.states[s] + ", " + data_.actions[a] + ") sums to " +
                                std::to_string(sum));
      }
    }
    if (data_.signal_kernel.size() != num_actions() * n * n * num_signals())
      throw ValidationError("signal kernel has wrong size");
    for (std::size_t a = 0; a < num_actions(); ++a)
      for (std::size_t s = 0; s < n; ++s)
        for (std::size_t next = 0; next < n; ++next) {
          const std::size_t off = kernel_offset(s, a, next);
          double sum = 0.0;
          for (std::size_t z = 0; z < num_signals(); ++z) {
            const double p = data_.signal_kernel[off + z];
            if (!(p >= 0.0)) throw ValidationError("negative signal probability");
            sum += p;
          }
          if (std::abs(sum - 1.0) > kStochasticTolerance)
            throw ValidationError("signal distribution (" + data_.states[s] + ", " + data_.actions[a] + ", " +
                                  data_.states[next] + ") sums to " + std::to_string(sum));
        }
    const auto& b = data_.initial_belief;
    if (b.size() != static_cast<Eigen::Index>(n)) throw ValidationError("initial belief has wrong length");
    if ((b.array() < 0.0).any() || std::abs(b.sum() - 1.0) > kStochasticTolerance)
      throw ValidationError("initial belief is not a probability vector");
  }

  void derive() {
    const std::size_t n = num_states();
    joint_.assign(num_symbols(), Eigen::MatrixXd::Zero(n, n));
    expected_reward_.assign(num_actions(), Eigen::VectorXd::Zero(n));
    for (std::size_t a = 0; a < num_actions(); ++a)
      for (std::size_t s = 0; s < n; ++s)
        for (std::size_t next = 0; next < n; ++next) {
          const double t = data_.transition[a](s, next);
          const std::size_t off = kernel_offset(s, a, next);
          for (std::size_t z = 0; z < num_signals(); ++z) {
            const double p = t * data_.signal_kernel[off + z];
            joint_[symbol_index(a, z)](s, next) = p;
            expected_reward_[a](s) += p * signal_reward(z);
          }
        }
  }

  PomdpData data_;
  std::vector<Eigen::MatrixXd> joint_;
  std::vector<Eigen::VectorXd> expected_reward_;
};

/// Throws ValidationError unless `b` is a probability vector over the model's states.
inline void validate_belief(const Pomdp& model, const Belief& b, double tol = kBeliefTolerance) {
  if (b.size() != static_cast<Eigen::Index>(model.num_states()))
    throw ValidationError("belief has length " + std::to_string(b.size()) + ", expected " +
                          std::to_string(model.num_states()));
  if ((b.array() < -tol).any()) throw ValidationError("belief has negative entries");
  if (std::abs(b.sum() - 1.0) > tol) throw ValidationError("belief does not sum to one");
}

inline Belief point_mass(std::size_t n, std::size_t i) { return Belief::Unit(static_cast<Eigen::Index>(n), i); }

/// Enforces the filter's numeric hygiene: entries below -1e-12 are an error,
/// smaller negatives are clamped and drift beyond 1e-12 is renormalized.
inline void sanitize_distribution(Belief& b) {
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    if (b(i) < -1e-12) throw ValidationError("filter produced a negative probability");
    if (b(i) < 0.0) b(i) = 0.0;
  }
  const double sum = b.sum();
  if (std::abs(sum - 1.0) > 1e-12) b /= sum;
}

struct FilterResult {
  double probability = 0.0;
  std::optional<Belief> posterior;  // empty when the signal is impossible
};

inline FilterResult belief_update(const Pomdp& model, const Belief& b, std::size_t action, std::size_t z) {
  Belief unnormalized = model.joint(action, z).transpose() * b;
  const double p = unnormalized.sum();
  if (!(p > 0.0)) return {0.0, std::nullopt};
  unnormalized /= p;
  sanitize_distribution(unnormalized);
  return {p, std::move(unnormalized)};
}

inline FilterResult belief_update(const Pomdp& model, const Belief& b, std::size_t action, const Signal& z) {
  return belief_update(model, b, action, model.signal_index(z));
}

/// Probability that running the test's actions from `b` yields exactly its signals.
inline double sequence_probability(const Pomdp& model, const Belief& b, const Test& t) {
  double probability = 1.0;
  Belief current = b;
  for (const Step& step : t) {
    auto result = belief_update(model, current, step.action, step.signal);
    if (!result.posterior) return 0.0;
    probability *= result.probability;
    current = std::move(*result.posterior);
  }
  return probability;
}

inline std::vector<std::size_t> test_symbols(const Pomdp& model, const Test& t) {
  std::vector<std::size_t> word;
  word.reserve(t.size());
  for (const Step& step : t) word.push_back(model.symbol_index(step));
  return word;
}

inline Test test_from_symbols(const Pomdp& model, const std::vector<std::size_t>& word) {
  Test t;
  t.reserve(word.size());
  for (std::size_t sym : word) t.push_back(model.step_at(sym));
  return t;
}

inline std::string describe_test(const Pomdp& model, const Test& t) {
  if (t.empty()) return "<empty>";
  std::string out;
  for (const Step& step : t) {
    if (!out.empty()) out += ' ';
    out += model.data().actions[step.action] + '/' + model.data().observations[step.signal.observation] + '/' +
           std::to_string(model.data().reward_values[step.signal.reward]);
  }
  return out;
}

/// All tests of length <= max_length in length-then-lexicographic symbol order.
inline std::vector<Test> enumerate_tests(const Pomdp& model, std::size_t max_length) {
  std::vector<Test> out{Test{}};
  std::size_t begin = 0;
  for (std::size_t len = 1; len <= max_length; ++len) {
    const std::size_t end = out.size();
    for (std::size_t i = begin; i < end; ++i)
      for (std::size_t sym = 0; sym < model.num_symbols(); ++sym) {
        Test t = out[i];
        t.push_back(model.step_at(sym));
        out.push_back(std::move(t));
      }
    begin = end;
  }
  return out;
}

}  // namespace mapomdp
