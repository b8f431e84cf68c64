#pragma once

// Reference models and seeded random model generators.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mapomdp/cassandra.hpp"
#include "mapomdp/pomdp.hpp"

namespace mapomdp::models {

inline std::string tiger_text(double discount = 0.75) {
  return "# classic tiger problem\n"
         "discount: " + std::to_string(discount) + "\n"
         "values: reward\n"
         "states: tiger-left tiger-right\n"
         "actions: listen open-left open-right\n"
         "observations: hear-left hear-right\n"
         "start: uniform\n"
         "T: listen\nidentity\n"
         "T: open-left\nuniform\n"
         "T: open-right\nuniform\n"
         "O: listen\n0.85 0.15\n0.15 0.85\n"
         "O: open-left\nuniform\n"
         "O: open-right\nuniform\n"
         "R: listen : * : * : * -1\n"
         "R: open-left : tiger-left : * : * -100\n"
         "R: open-left : tiger-right : * : * 10\n"
         "R: open-right : tiger-left : * : * 10\n"
         "R: open-right : tiger-right : * : * -100\n";
}

inline Pomdp tiger(double discount = 0.75) { return parse_cassandra(tiger_text(discount)); }

inline std::string fair_coin_text() {
  return "discount: 0.9\n"
         "values: reward\n"
         "states: 1\n"
         "actions: flip\n"
         "observations: heads tails\n"
         "T: flip\nidentity\n"
         "O: flip\n0.5 0.5\n"
         "R: flip : * : * : heads 1\n";
}

inline Pomdp fair_coin() { return parse_cassandra(fair_coin_text()); }

/// n-state MDP in disguise: the observation names the arriving state.
/// Action `stay` keeps the state, action `move` cycles to the next one;
/// reward 1 for arriving in the last state.
inline Pomdp fully_observable(std::size_t n = 2, double discount = 0.75) {
  PomdpData d;
  for (std::size_t i = 0; i < n; ++i) {
    d.states.push_back("s" + std::to_string(i));
    d.observations.push_back("at-s" + std::to_string(i));
  }
  d.actions = {"stay", "move"};
  d.reward_values = {0.0, 1.0};
  d.transition.assign(2, Eigen::MatrixXd::Zero(n, n));
  for (std::size_t i = 0; i < n; ++i) {
    d.transition[0](i, i) = 0.9;
    d.transition[0](i, (i + 1) % n) += 0.1;
    d.transition[1](i, (i + 1) % n) = 1.0;
  }
  const std::size_t nz = n * 2;
  d.signal_kernel.assign(2 * n * n * nz, 0.0);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t t = 0; t < n; ++t) {
        const std::size_t reward = (t == n - 1) ? 1 : 0;
        d.signal_kernel[((a * n + s) * n + t) * nz + t * 2 + reward] = 1.0;
      }
  d.discount = discount;
  d.initial_belief = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  return Pomdp(std::move(d));
}

/// Four hidden states where states 2 and 3 are exact copies of states 0 and 1
/// (same transition behaviour into the pair classes, same signals).
inline Pomdp duplicated_states(double discount = 0.75) {
  PomdpData d;
  d.states = {"a", "b", "a-copy", "b-copy"};
  d.actions = {"wait", "probe"};
  d.observations = {"low", "high"};
  d.reward_values = {0.0, 1.0};
  const std::size_t n = 4;
  Eigen::MatrixXd wait(n, n), probe(n, n);
  // Each state moves to class A or class B; copies behave identically.
  wait << 0.35, 0.25, 0.25, 0.15,  //
      0.10, 0.40, 0.20, 0.30,      //
      0.35, 0.25, 0.25, 0.15,      //
      0.10, 0.40, 0.20, 0.30;
  probe << 0.5, 0.0, 0.0, 0.5,  //
      0.0, 0.5, 0.5, 0.0,       //
      0.5, 0.0, 0.0, 0.5,       //
      0.0, 0.5, 0.5, 0.0;
  d.transition = {wait, probe};
  const std::size_t nz = 4;
  d.signal_kernel.assign(2 * n * n * nz, 0.0);
  const double high_prob[4] = {0.2, 0.7, 0.2, 0.7};
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t t = 0; t < n; ++t) {
        const std::size_t off = ((a * n + s) * n + t) * nz;
        const std::size_t reward = (a == 1 && (t == 1 || t == 3)) ? 1 : 0;
        d.signal_kernel[off + 0 * 2 + reward] = 1.0 - high_prob[t];
        d.signal_kernel[off + 1 * 2 + reward] = high_prob[t];
      }
  d.discount = discount;
  d.initial_belief = Eigen::VectorXd::Constant(n, 0.25);
  return Pomdp(std::move(d));
}

/// Two absorbing "pure" states u, v plus mixture states that jump to u with
/// probability q and to v otherwise. Signals depend on the arriving state
/// only, so every mixture row is q*F_u + (1-q)*F_v and the rank is 2. With
/// `near_duplicate`, the first two states are mixtures with q = 0.5 and
/// q = 0.5 + 1e-3, giving a badly conditioned initial basis.
inline Pomdp mixture_chain(bool near_duplicate = true, double discount = 0.75) {
  const std::vector<double> qs = near_duplicate ? std::vector<double>{0.5, 0.501} : std::vector<double>{0.3};
  PomdpData d;
  const std::size_t mixtures = qs.size();
  const std::size_t n = mixtures + 2;
  for (std::size_t i = 0; i < mixtures; ++i) d.states.push_back("mix" + std::to_string(i));
  d.states.push_back("u");
  d.states.push_back("v");
  d.actions = {"look"};
  d.observations = {"dark", "bright"};
  d.reward_values = {0.0, 1.0};
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
  const std::size_t u = mixtures, v = mixtures + 1;
  for (std::size_t i = 0; i < mixtures; ++i) {
    t(i, u) = qs[i];
    t(i, v) = 1.0 - qs[i];
  }
  t(u, u) = 1.0;
  t(v, v) = 1.0;
  d.transition = {t};
  const std::size_t nz = 4;
  d.signal_kernel.assign(n * n * nz, 0.0);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t next = 0; next < n; ++next) {
      const std::size_t off = (s * n + next) * nz;
      const double bright = next == u ? 0.9 : (next == v ? 0.1 : 0.5);
      d.signal_kernel[off + 0 * 2 + 0] = 1.0 - bright;  // dark, reward 0
      d.signal_kernel[off + 1 * 2 + 1] = bright;        // bright, reward 1
    }
  d.discount = discount;
  d.initial_belief = Eigen::VectorXd::Unit(n, 0);
  return Pomdp(std::move(d));
}

struct RandomModelSpec {
  std::size_t states = 3;
  std::size_t actions = 2;
  std::size_t observations = 2;
  std::size_t rewards = 2;
  double discount = 0.75;
  // When false the signal depends on (a, s') only.
  bool departure_dependent = true;
  // Probability that an individual kernel entry is zeroed before normalization.
  double sparsity = 0.2;
};

namespace detail {

inline void random_distribution(std::mt19937_64& rng, double sparsity, double* out, std::size_t count) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = unit(rng) < sparsity ? 0.0 : unit(rng) + 1e-3;
    sum += out[i];
  }
  if (sum <= 0.0) {
    out[std::uniform_int_distribution<std::size_t>(0, count - 1)(rng)] = 1.0;
    return;
  }
  for (std::size_t i = 0; i < count; ++i) out[i] /= sum;
}

}  // namespace detail

/// Random model with arbitrary kernels; rewards spread evenly over [0,1].
inline Pomdp random_pomdp(std::uint64_t seed, const RandomModelSpec& spec) {
  std::mt19937_64 rng(seed);
  const std::size_t n = spec.states, na = spec.actions, no = spec.observations, nr = spec.rewards;
  PomdpData d;
  for (std::size_t i = 0; i < n; ++i) d.states.push_back("s" + std::to_string(i));
  for (std::size_t i = 0; i < na; ++i) d.actions.push_back("a" + std::to_string(i));
  for (std::size_t i = 0; i < no; ++i) d.observations.push_back("o" + std::to_string(i));
  for (std::size_t i = 0; i < nr; ++i) d.reward_values.push_back(nr == 1 ? 0.5 : static_cast<double>(i) / (nr - 1));
  std::vector<double> row(std::max(n, no * nr));
  for (std::size_t a = 0; a < na; ++a) {
    Eigen::MatrixXd t(n, n);
    for (std::size_t s = 0; s < n; ++s) {
      detail::random_distribution(rng, spec.sparsity, row.data(), n);
      for (std::size_t j = 0; j < n; ++j) t(s, j) = row[j];
    }
    d.transition.push_back(std::move(t));
  }
  const std::size_t nz = no * nr;
  d.signal_kernel.assign(na * n * n * nz, 0.0);
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t next = 0; next < n; ++next) {
      detail::random_distribution(rng, spec.sparsity, row.data(), nz);
      for (std::size_t s = 0; s < n; ++s) {
        if (spec.departure_dependent && s > 0) detail::random_distribution(rng, spec.sparsity, row.data(), nz);
        std::copy(row.begin(), row.begin() + nz, d.signal_kernel.begin() + ((a * n + s) * n + next) * nz);
      }
    }
  d.discount = spec.discount;
  d.initial_belief.resize(n);
  detail::random_distribution(rng, 0.0, d.initial_belief.data(), n);
  return Pomdp(std::move(d));
}

/// Desk-scale planning model: n in {2,3,4}, two actions, two observations,
/// and a reward in {0,1} fixed by (action, observation). Hidden state only
/// shapes the observation odds, so signals branch at most twice per action.
inline Pomdp desk_random_pomdp(std::uint64_t seed, double discount = 0.3) {
  std::mt19937_64 rng(seed);
  const std::size_t n = 2 + std::uniform_int_distribution<std::size_t>(0, 2)(rng);
  const std::size_t na = 2, nr = 2, nz = 4;
  PomdpData d;
  for (std::size_t i = 0; i < n; ++i) d.states.push_back("s" + std::to_string(i));
  d.actions = {"a0", "a1"};
  d.observations = {"o0", "o1"};
  d.reward_values = {0.0, 1.0};
  std::vector<double> row(n);
  for (std::size_t a = 0; a < na; ++a) {
    Eigen::MatrixXd t(n, n);
    for (std::size_t s = 0; s < n; ++s) {
      detail::random_distribution(rng, 0.25, row.data(), n);
      for (std::size_t j = 0; j < n; ++j) t(s, j) = row[j];
    }
    d.transition.push_back(std::move(t));
  }
  std::size_t reward_of[2][2];
  for (auto& by_action : reward_of)
    for (auto& r : by_action) r = std::uniform_int_distribution<std::size_t>(0, 1)(rng);
  // Keep at least one rewarding and one non-rewarding outcome per action.
  for (std::size_t a = 0; a < na; ++a) reward_of[a][1] = 1 - reward_of[a][0];
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  d.signal_kernel.assign(na * n * n * nz, 0.0);
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t next = 0; next < n; ++next) {
      const double p0 = unit(rng);
      for (std::size_t s = 0; s < n; ++s) {
        const std::size_t off = ((a * n + s) * n + next) * nz;
        d.signal_kernel[off + 0 * nr + reward_of[a][0]] = p0;
        d.signal_kernel[off + 1 * nr + reward_of[a][1]] = 1.0 - p0;
      }
    }
  d.discount = discount;
  d.initial_belief.resize(n);
  detail::random_distribution(rng, 0.0, d.initial_belief.data(), n);
  return Pomdp(std::move(d));
}

}  // namespace mapomdp::models
