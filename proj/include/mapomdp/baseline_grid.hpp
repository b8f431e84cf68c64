#pragma once

// Fixed-resolution grid over the belief simplex: beliefs are rounded to
// multiples of delta and the belief MDP is solved on the grid.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mapomdp/errors.hpp"
#include "mapomdp/log.hpp"
#include "mapomdp/modified_mdp.hpp"
#include "mapomdp/pomdp.hpp"
#include "mapomdp/value_iteration.hpp"

namespace mapomdp {

/// Lattice counts m_i with sum K = 1/delta; the belief is m * delta.
using SimplexGridState = std::vector<int>;

/// 1/delta, rejecting deltas whose reciprocal is not an integer.
inline int simplex_resolution(double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw ValidationError("delta must lie in (0, 1]");
  const double k = 1.0 / delta;
  const double rounded = std::round(k);
  if (std::abs(k - rounded) > 1e-9 * rounded) throw ValidationError("1/delta must be an integer");
  return static_cast<int>(rounded);
}

/// Largest-remainder rounding: floor every coordinate, then hand the missing
/// units to the largest remainders (lower index first on ties).
inline SimplexGridState round_to_simplex(const Belief& b, int resolution) {
  const auto n = static_cast<std::size_t>(b.size());
  SimplexGridState m(n);
  std::vector<double> remainder(n);
  int assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double scaled = std::max(0.0, b(static_cast<Eigen::Index>(i))) * resolution;
    const double fl = std::floor(scaled + 1e-9);
    m[i] = static_cast<int>(fl);
    remainder[i] = scaled - fl;
    assigned += m[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return remainder[x] > remainder[y]; });
  for (std::size_t k = 0; assigned < resolution; ++k, ++assigned) ++m[order[k % n]];
  // Inputs summing slightly above one: trim from the smallest remainders.
  for (std::size_t k = n; assigned > resolution && k-- > 0;) {
    if (m[order[k]] > 0) {
      --m[order[k]];
      --assigned;
      if (k == 0 && assigned > resolution) k = n;
    }
  }
  return m;
}

inline Belief simplex_belief(const SimplexGridState& m, int resolution) {
  Belief b(static_cast<Eigen::Index>(m.size()));
  for (std::size_t i = 0; i < m.size(); ++i) b(static_cast<Eigen::Index>(i)) = static_cast<double>(m[i]) / resolution;
  return b;
}

/// Number of lattice points on the simplex: C(K + n - 1, n - 1).
inline std::size_t simplex_lattice_size(std::size_t n, int resolution) {
  double count = 1.0;
  for (std::size_t i = 1; i < n; ++i) count = count * static_cast<double>(resolution + i) / static_cast<double>(i);
  if (count > 1e18) return std::numeric_limits<std::size_t>::max();
  return static_cast<std::size_t>(std::llround(count));
}

struct SimplexGrid {
  double delta = 0.0;
  int resolution = 0;
  GridMode mode = GridMode::reachable;
  std::vector<SimplexGridState> states;
  std::unordered_map<SimplexGridState, std::size_t, GridStateHash> index;
  FiniteMdp mdp{1, 0.5};
  std::size_t initial = 0;
  GridDiagnostics diagnostics;

  std::optional<std::size_t> find(const SimplexGridState& g) const {
    auto it = index.find(g);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }
};

inline SimplexGrid build_delta_grid(const Pomdp& model, double delta, const GridOptions& options = {}) {
  SimplexGrid grid;
  grid.delta = delta;
  grid.resolution = simplex_resolution(delta);
  grid.mode = options.mode;
  grid.mdp = FiniteMdp(model.num_actions(), model.discount());
  const int k = grid.resolution;
  const std::size_t n = model.num_states();

  auto insert = [&](const SimplexGridState& g) -> std::size_t {
    auto [it, added] = grid.index.try_emplace(g, grid.states.size());
    if (added) {
      grid.states.push_back(g);
      if (grid.states.size() > options.state_cap)
        throw BudgetError("simplex grid state cap of " + std::to_string(options.state_cap) +
                          " exceeded; use a larger delta or raise the cap");
    }
    return it->second;
  };

  if (options.mode == GridMode::full) {
    const std::size_t total = simplex_lattice_size(n, k);
    if (total > options.state_cap)
      throw BudgetError("simplex lattice has " + std::to_string(total) + " states, above the cap of " +
                        std::to_string(options.state_cap));
    SimplexGridState g(n, 0);
    auto enumerate = [&](auto&& self, std::size_t i, int left) -> void {
      if (i + 1 == n) {
        g[i] = left;
        insert(g);
        return;
      }
      for (int v = left; v >= 0; --v) {
        g[i] = v;
        self(self, i + 1, left - v);
      }
    };
    enumerate(enumerate, 0, k);
  }

  grid.initial = insert(round_to_simplex(model.initial_belief(), k));

  std::vector<std::pair<SimplexGridState, double>> branches;
  std::vector<Transition> successors;
  for (std::size_t s = 0; s < grid.states.size(); ++s) {
    const Belief b = simplex_belief(grid.states[s], k);
    for (std::size_t a = 0; a < model.num_actions(); ++a) {
      branches.clear();
      double total = 0.0;
      for (std::size_t z = 0; z < model.num_signals(); ++z) {
        FilterResult step = belief_update(model, b, a, z);
        if (!step.posterior) continue;
        if (step.probability <= options.p_min) {
          ++grid.diagnostics.dropped_branches;
          continue;
        }
        SimplexGridState next = round_to_simplex(*step.posterior, k);
        auto same = std::find_if(branches.begin(), branches.end(), [&](const auto& e) { return e.first == next; });
        if (same != branches.end())
          same->second += step.probability;
        else
          branches.emplace_back(std::move(next), step.probability);
        total += step.probability;
      }
      successors.clear();
      if (branches.empty()) {
        ++grid.diagnostics.dead_ends;
        successors.push_back({s, 1.0});
      } else {
        for (const auto& [g, p] : branches) successors.push_back({insert(g), p / total});
      }
      grid.mdp.add_row(std::clamp(b.dot(model.expected_reward(a)), 0.0, 1.0), successors);
    }
  }
  return grid;
}

inline PlanResult solve_baseline(const SimplexGrid& grid, double vi_tol) {
  PlanResult result = solve_mdp(grid.mdp, vi_tol);
  result.metadata["delta"] = grid.delta;
  result.metadata["gridStates"] = static_cast<double>(grid.states.size());
  return result;
}

inline std::size_t act_baseline(const SimplexGrid& grid, const PlanResult& result, const Belief& b) {
  const SimplexGridState g = round_to_simplex(b, grid.resolution);
  if (auto idx = grid.find(g)) return result.policy[*idx];
  warn("belief rounds to an unexpanded simplex grid state; using the nearest expanded state");
  return result.policy[detail::nearest_grid_state(grid.states, g)];
}

inline nlohmann::ordered_json to_json(const SimplexGrid& grid, const PlanResult& result,
                                      const std::vector<std::string>& action_names) {
  nlohmann::ordered_json j;
  j["delta"] = grid.delta;
  j["resolution"] = grid.resolution;
  j["mode"] = grid.mode == GridMode::full ? "full" : "reachable";
  j["initialState"] = grid.initial;
  nlohmann::ordered_json states = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < grid.states.size(); ++s) {
    nlohmann::ordered_json entry;
    entry["lattice"] = grid.states[s];
    entry["action"] = action_names.at(result.policy[s]);
    entry["value"] = result.values[s];
    states.push_back(std::move(entry));
  }
  j["states"] = std::move(states);
  nlohmann::ordered_json meta;
  meta["bellmanResidual"] = result.residual;
  meta["iterations"] = result.iterations;
  for (const auto& [key, v] : result.metadata) meta[key] = v;
  j["metadata"] = std::move(meta);
  return j;
}

}  // namespace mapomdp
