#pragma once

// Planning over the modified belief MDP: beliefs are represented by their
// coefficient vectors against the spanner basis, and the coefficient space
// [-2, 2]^r is discretized with mesh epsilon / r.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mapomdp/automaton.hpp"
#include "mapomdp/decomposition.hpp"
#include "mapomdp/errors.hpp"
#include "mapomdp/log.hpp"
#include "mapomdp/pomdp.hpp"
#include "mapomdp/value_iteration.hpp"

namespace mapomdp {

inline constexpr double kCoefficientBound = 2.0;

/// One-step quantities of the basis states, indexed by symbol = action * |Z| + z.
struct SignalDynamics {
  std::size_t rank = 0;
  std::size_t num_actions = 0;
  std::size_t num_signals = 0;
  std::vector<Eigen::VectorXd> signal_prob;   // v_{a,z}(i) = P(z | b_i, a)
  std::vector<Eigen::MatrixXd> extension;     // W_{a,z}(i, j) = P((a,z)∘t_j | b_i)
  std::vector<Eigen::VectorXd> reward;        // rho_a(i), per action
  std::vector<double> signal_reward;          // normalized reward of each signal

  const Eigen::VectorXd& v(std::size_t a, std::size_t z) const { return signal_prob[a * num_signals + z]; }
  const Eigen::MatrixXd& w(std::size_t a, std::size_t z) const { return extension[a * num_signals + z]; }
};

inline SignalDynamics precompute_dynamics(const Pomdp& model, const SpannerBasis& spanner) {
  const CoreDecomposition& decomp = spanner.decomposition;
  const MultiplicityAutomaton ma = from_pomdp(model);
  const std::size_t r = decomp.rank();
  SignalDynamics dyn;
  dyn.rank = r;
  dyn.num_actions = model.num_actions();
  dyn.num_signals = model.num_signals();
  dyn.reward.assign(model.num_actions(), Eigen::VectorXd::Zero(r));
  for (std::size_t z = 0; z < model.num_signals(); ++z) dyn.signal_reward.push_back(model.signal_reward(z));
  for (std::size_t sym = 0; sym < model.num_symbols(); ++sym) {
    const std::size_t a = sym / model.num_signals();
    const std::size_t z = sym % model.num_signals();
    const std::vector<std::size_t> word{sym};
    const Eigen::VectorXd one_step = ma.column(word);
    const Eigen::MatrixXd ext = ma.mu(sym) * decomp.state_signatures();
    Eigen::VectorXd v(r);
    Eigen::MatrixXd w(r, r);
    for (std::size_t i = 0; i < r; ++i) {
      v(i) = one_step(decomp.basis_states()[i]);
      w.row(i) = ext.row(decomp.basis_states()[i]);
    }
    dyn.reward[a] += model.signal_reward(z) * v;
    dyn.signal_prob.push_back(std::move(v));
    dyn.extension.push_back(std::move(w));
  }
  return dyn;
}

struct CoefficientStep {
  double probability = 0.0;
  bool reachable = false;
  Eigen::VectorXd beta;       // successor coefficients, clamped to [-2, 2]
  double clamp_magnitude = 0.0;  // largest |beta_i| - 2 removed by clamping
};

inline constexpr double kMinBranchProbability = 1e-9;

/// Coefficients of the filtered belief after taking `a` and seeing `z`.
inline CoefficientStep step_coefficients(const SignalDynamics& dyn, const CoreDecomposition& decomp,
                                         const Eigen::VectorXd& alpha, std::size_t a, std::size_t z,
                                         double p_min = kMinBranchProbability) {
  CoefficientStep out;
  out.probability = std::clamp(alpha.dot(dyn.v(a, z)), 0.0, 1.0);
  if (out.probability <= p_min) return out;
  out.reachable = true;
  const Eigen::VectorXd predicted = (dyn.w(a, z).transpose() * alpha) / out.probability;
  out.beta = decomp.solve(predicted).alpha;
  for (Eigen::Index i = 0; i < out.beta.size(); ++i) {
    const double excess = std::abs(out.beta(i)) - kCoefficientBound;
    if (excess > 0.0) {
      out.clamp_magnitude = std::max(out.clamp_magnitude, excess);
      out.beta(i) = std::clamp(out.beta(i), -kCoefficientBound, kCoefficientBound);
    }
  }
  return out;
}

/// Integer lattice coordinates m; the coefficient vector is m * mesh.
using GridState = std::vector<int>;

struct GridStateHash {
  std::size_t operator()(const GridState& g) const noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    for (int v : g) {
      h ^= static_cast<std::uint32_t>(v);
      h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

/// Largest lattice index m with m * mesh <= 2.
inline int max_lattice_index(double mesh) { return static_cast<int>(std::floor(kCoefficientBound / mesh + 1e-9)); }

/// Nearest lattice point per coordinate, ties toward -infinity, clamped into [-2, 2].
inline GridState round_to_grid(const Eigen::VectorXd& alpha, double mesh) {
  const int bound = max_lattice_index(mesh);
  GridState g(static_cast<std::size_t>(alpha.size()));
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    const double m = std::ceil(alpha(i) / mesh - 0.5);
    g[static_cast<std::size_t>(i)] = static_cast<int>(std::clamp(m, static_cast<double>(-bound), static_cast<double>(bound)));
  }
  return g;
}

inline Eigen::VectorXd grid_coefficients(const GridState& g, double mesh) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) out(static_cast<Eigen::Index>(i)) = g[i] * mesh;
  return out;
}

enum class GridMode { reachable, full };

struct GridOptions {
  GridMode mode = GridMode::reachable;
  std::size_t state_cap = 2000000;
  double p_min = kMinBranchProbability;
};

struct GridDiagnostics {
  std::size_t reward_clamps = 0;
  std::size_t coefficient_clamps = 0;
  double max_coefficient_clamp = 0.0;
  std::size_t dropped_branches = 0;
  std::size_t dead_ends = 0;  // (state, action) rows with no surviving branch; made self-loops
};

/// Discretized modified belief MDP.
struct GridMdp {
  double epsilon = 0.0;
  double mesh = 0.0;
  std::size_t rank = 0;
  GridMode mode = GridMode::reachable;
  std::vector<GridState> states;
  std::unordered_map<GridState, std::size_t, GridStateHash> index;
  FiniteMdp mdp{1, 0.5};
  std::size_t initial = 0;
  GridDiagnostics diagnostics;

  std::optional<std::size_t> find(const GridState& g) const {
    auto it = index.find(g);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }
};

/// (2 * floor(2 / mesh) + 1)^r.
inline std::size_t full_lattice_size(std::size_t rank, double mesh) {
  const auto side = static_cast<std::size_t>(2 * max_lattice_index(mesh) + 1);
  std::size_t total = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    if (total > std::numeric_limits<std::size_t>::max() / side) return std::numeric_limits<std::size_t>::max();
    total *= side;
  }
  return total;
}

inline GridMdp build_grid(const Pomdp& model, const SpannerBasis& spanner, const SignalDynamics& dyn, double epsilon,
                          const GridOptions& options = {}) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ValidationError("epsilon must lie in (0, 1]");
  const CoreDecomposition& decomp = spanner.decomposition;
  GridMdp grid;
  grid.epsilon = epsilon;
  grid.rank = decomp.rank();
  grid.mesh = epsilon / static_cast<double>(grid.rank);
  grid.mode = options.mode;
  grid.mdp = FiniteMdp(model.num_actions(), model.discount());
  const double mesh = grid.mesh;
  const int bound = max_lattice_index(mesh);

  auto insert = [&](const GridState& g) -> std::size_t {
    auto [it, added] = grid.index.try_emplace(g, grid.states.size());
    if (added) {
      grid.states.push_back(g);
      if (grid.states.size() > options.state_cap)
        throw BudgetError("grid state cap of " + std::to_string(options.state_cap) +
                          " exceeded; use a larger epsilon or raise the cap");
    }
    return it->second;
  };

  if (options.mode == GridMode::full) {
    const std::size_t total = full_lattice_size(grid.rank, mesh);
    if (total > options.state_cap)
      throw BudgetError("full lattice has " + std::to_string(total) + " states, above the cap of " +
                        std::to_string(options.state_cap));
    GridState g(grid.rank, -bound);
    for (std::size_t k = 0; k < total; ++k) {
      insert(g);
      for (std::size_t i = grid.rank; i-- > 0;) {
        if (g[i] < bound) {
          ++g[i];
          break;
        }
        g[i] = -bound;
      }
    }
  }

  const Eigen::VectorXd start = decomp.solve(decomp.signature(model.initial_belief())).alpha;
  grid.initial = insert(round_to_grid(start.cwiseMax(-kCoefficientBound).cwiseMin(kCoefficientBound), mesh));

  std::vector<std::pair<GridState, double>> branches;
  std::vector<Transition> successors;
  for (std::size_t s = 0; s < grid.states.size(); ++s) {
    const Eigen::VectorXd alpha = grid_coefficients(grid.states[s], mesh);
    for (std::size_t a = 0; a < model.num_actions(); ++a) {
      branches.clear();
      double total = 0.0;
      for (std::size_t z = 0; z < model.num_signals(); ++z) {
        const CoefficientStep step = step_coefficients(dyn, decomp, alpha, a, z, options.p_min);
        if (!step.reachable) {
          if (step.probability > 0.0) ++grid.diagnostics.dropped_branches;
          continue;
        }
        if (step.clamp_magnitude > 0.0) {
          ++grid.diagnostics.coefficient_clamps;
          grid.diagnostics.max_coefficient_clamp = std::max(grid.diagnostics.max_coefficient_clamp, step.clamp_magnitude);
        }
        GridState next = round_to_grid(step.beta, mesh);
        auto same = std::find_if(branches.begin(), branches.end(), [&](const auto& b) { return b.first == next; });
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
      double reward = alpha.dot(dyn.reward[a]);
      if (reward < -1e-12 || reward > 1.0 + 1e-12) ++grid.diagnostics.reward_clamps;
      reward = std::clamp(reward, 0.0, 1.0);
      grid.mdp.add_row(reward, successors);
    }
  }
  return grid;
}

inline PlanResult solve(const GridMdp& grid, double vi_tol) {
  PlanResult result = solve_mdp(grid.mdp, vi_tol);
  result.metadata["rank"] = static_cast<double>(grid.rank);
  result.metadata["epsilon"] = grid.epsilon;
  result.metadata["mesh"] = grid.mesh;
  result.metadata["gridStates"] = static_cast<double>(grid.states.size());
  return result;
}

struct PlanOptions {
  DecompositionConfig decomposition;
  GridOptions grid;
};

/// Everything produced by the planning pipeline; `act` needs the spanner and grid.
struct RankPlan {
  CoreDecomposition basis;
  SpannerBasis spanner;
  SignalDynamics dynamics;
  GridMdp grid;
  PlanResult result;
};

inline RankPlan plan(const Pomdp& model, double epsilon, double vi_tol, const PlanOptions& options = {}) {
  using clock = std::chrono::steady_clock;
  auto seconds = [](clock::time_point from) { return std::chrono::duration<double>(clock::now() - from).count(); };
  auto t0 = clock::now();
  CoreDecomposition basis = discover_basis(model, options.decomposition);
  const double t_basis = seconds(t0);
  t0 = clock::now();
  SpannerBasis spanner = improve_to_spanner(basis, options.decomposition);
  const double t_spanner = seconds(t0);
  t0 = clock::now();
  SignalDynamics dynamics = precompute_dynamics(model, spanner);
  const double t_dynamics = seconds(t0);
  t0 = clock::now();
  GridMdp grid = build_grid(model, spanner, dynamics, epsilon, options.grid);
  const double t_grid = seconds(t0);
  t0 = clock::now();
  PlanResult result = solve(grid, vi_tol);
  result.metadata["time.discoverBasis"] = t_basis;
  result.metadata["time.spanner"] = t_spanner;
  result.metadata["time.dynamics"] = t_dynamics;
  result.metadata["time.buildGrid"] = t_grid;
  result.metadata["time.solve"] = seconds(t0);
  result.metadata["spannerSwaps"] = static_cast<double>(spanner.swaps.size());
  return RankPlan{std::move(basis), std::move(spanner), std::move(dynamics), std::move(grid), std::move(result)};
}

struct ActResult {
  std::size_t action = 0;
  std::size_t grid_state = 0;
  bool fallback = false;
};

namespace detail {

inline std::size_t nearest_grid_state(const std::vector<GridState>& states, const GridState& g) {
  std::size_t best = 0;
  long best_dist = std::numeric_limits<long>::max();
  for (std::size_t s = 0; s < states.size(); ++s) {
    long d = 0;
    for (std::size_t i = 0; i < g.size(); ++i) d += std::abs(static_cast<long>(states[s][i]) - g[i]);
    if (d < best_dist) {
      best_dist = d;
      best = s;
    }
  }
  return best;
}

}  // namespace detail

inline ActResult act_detailed(const SpannerBasis& spanner, const GridMdp& grid, const PlanResult& result,
                              const Belief& b) {
  const CoreDecomposition& decomp = spanner.decomposition;
  const Eigen::VectorXd alpha =
      decomp.solve(decomp.signature(b)).alpha.cwiseMax(-kCoefficientBound).cwiseMin(kCoefficientBound);
  const GridState g = round_to_grid(alpha, grid.mesh);
  ActResult out;
  if (auto idx = grid.find(g)) {
    out.grid_state = *idx;
  } else {
    out.grid_state = detail::nearest_grid_state(grid.states, g);
    out.fallback = true;
    warn("belief rounds to an unexpanded grid state; using the nearest expanded state");
  }
  out.action = result.policy[out.grid_state];
  return out;
}

inline std::size_t act(const SpannerBasis& spanner, const RankPlan& plan, const Belief& b) {
  return act_detailed(spanner, plan.grid, plan.result, b).action;
}

inline std::size_t act(const RankPlan& plan, const Belief& b) { return act(plan.spanner, plan, b); }

inline nlohmann::ordered_json to_json(const GridMdp& grid, const PlanResult& result,
                                      const std::vector<std::string>& action_names) {
  nlohmann::ordered_json j;
  j["mesh"] = grid.mesh;
  j["epsilon"] = grid.epsilon;
  j["rank"] = grid.rank;
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
  for (const auto& [k, v] : result.metadata) meta[k] = v;
  j["metadata"] = std::move(meta);
  return j;
}

// ---- binary cache of SignalDynamics --------------------------------------

inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline constexpr char kDynamicsMagic[8] = {'M', 'A', 'P', 'D', 'Y', 'N', '0', '1'};

/// Layout: magic[8], u64 model hash, u64 spanner hash, u64 rank, u64 actions,
/// u64 signals, then per symbol v (r doubles) and W (r*r doubles, row-major),
/// then per action rho (r doubles), then per signal its reward. Host byte order.
inline void save_dynamics_cache(const std::string& path, const SignalDynamics& dyn, std::uint64_t model_hash,
                                std::uint64_t spanner_hash) {
  const std::string tmp = path + ".tmp";
  std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write dynamics cache '" + path + "'");
  auto put = [&](const auto& value) { out.write(reinterpret_cast<const char*>(&value), sizeof value); };
  out.write(kDynamicsMagic, sizeof kDynamicsMagic);
  put(model_hash);
  put(spanner_hash);
  put(static_cast<std::uint64_t>(dyn.rank));
  put(static_cast<std::uint64_t>(dyn.num_actions));
  put(static_cast<std::uint64_t>(dyn.num_signals));
  for (std::size_t k = 0; k < dyn.signal_prob.size(); ++k) {
    for (Eigen::Index i = 0; i < dyn.signal_prob[k].size(); ++i) put(dyn.signal_prob[k](i));
    for (Eigen::Index i = 0; i < dyn.extension[k].rows(); ++i)
      for (Eigen::Index j = 0; j < dyn.extension[k].cols(); ++j) put(dyn.extension[k](i, j));
  }
  for (const auto& rho : dyn.reward)
    for (Eigen::Index i = 0; i < rho.size(); ++i) put(rho(i));
  for (double r : dyn.signal_reward) put(r);
  out.close();
  if (!out) throw std::runtime_error("failed writing dynamics cache '" + path + "'");
  std::filesystem::rename(tmp, path);
}

/// Returns nothing when the file is missing, malformed or keyed to other inputs.
inline std::optional<SignalDynamics> load_dynamics_cache(const std::string& path, std::uint64_t model_hash,
                                                         std::uint64_t spanner_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  auto get = [&](auto& value) { return static_cast<bool>(in.read(reinterpret_cast<char*>(&value), sizeof value)); };
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kDynamicsMagic, sizeof magic) != 0) return std::nullopt;
  std::uint64_t mh = 0, sh = 0, r = 0, na = 0, nz = 0;
  if (!get(mh) || !get(sh) || !get(r) || !get(na) || !get(nz)) return std::nullopt;
  if (mh != model_hash || sh != spanner_hash || r == 0 || r > 4096 || na * nz > (1u << 24)) return std::nullopt;
  SignalDynamics dyn;
  dyn.rank = r;
  dyn.num_actions = na;
  dyn.num_signals = nz;
  const auto ri = static_cast<Eigen::Index>(r);
  for (std::size_t k = 0; k < na * nz; ++k) {
    Eigen::VectorXd v(ri);
    Eigen::MatrixXd w(ri, ri);
    for (Eigen::Index i = 0; i < ri; ++i)
      if (!get(v(i))) return std::nullopt;
    for (Eigen::Index i = 0; i < ri; ++i)
      for (Eigen::Index j = 0; j < ri; ++j)
        if (!get(w(i, j))) return std::nullopt;
    dyn.signal_prob.push_back(std::move(v));
    dyn.extension.push_back(std::move(w));
  }
  for (std::size_t a = 0; a < na; ++a) {
    Eigen::VectorXd rho(ri);
    for (Eigen::Index i = 0; i < ri; ++i)
      if (!get(rho(i))) return std::nullopt;
    dyn.reward.push_back(std::move(rho));
  }
  for (std::size_t z = 0; z < nz; ++z) {
    double v = 0.0;
    if (!get(v)) return std::nullopt;
    dyn.signal_reward.push_back(v);
  }
  return dyn;
}

}  // namespace mapomdp
