#pragma once

// Command-line front end: plan, baseline, compare and sweep subcommands.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mapomdp/baseline_grid.hpp"
#include "mapomdp/decomposition.hpp"
#include "mapomdp/errors.hpp"
#include "mapomdp/model_io.hpp"
#include "mapomdp/modified_mdp.hpp"
#include "mapomdp/oracle.hpp"
#include "mapomdp/pomdp.hpp"
#include "mapomdp/simulate.hpp"

namespace mapomdp::cli {

inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { kOk = 0, kFailure = 1, kValidation = 2, kBudget = 3 };

struct Options {
  std::string model_path;
  double epsilon = 0.1;
  double delta = 0.05;
  double vi_tol = 1e-4;
  double oracle_slack = 1e-2;
  std::string grid_mode = "reachable";
  std::size_t state_cap = 2000000;
  std::uint64_t seed = 0;
  std::size_t episodes = 0;
  std::size_t episode_horizon = 0;  // 0: pick from the discount
  bool no_timings = false;
  bool oracle = false;
  std::string normalization = "auto";
  std::string json_out;
  std::string policy_out;
  std::string csv_out;
  std::string dynamics_cache;
  std::vector<double> epsilons{0.4, 0.2, 0.1};
  std::vector<double> deltas{0.25, 0.1, 0.05};
};

/// Writes to a sibling temporary file and renames it into place.
inline void write_atomically(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << contents;
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error("failed writing '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, target);
}

namespace detail {

/// Remembers which pipeline stage is running so failures can name it.
struct Stage {
  std::string name = "startup";
  void operator()(std::string next) { name = std::move(next); }
};

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - start).count();
    start = now;
    return s;
  }
};

inline GridOptions grid_options(const Options& o) {
  GridOptions g;
  if (o.grid_mode == "full")
    g.mode = GridMode::full;
  else if (o.grid_mode == "reachable")
    g.mode = GridMode::reachable;
  else
    throw ValidationError("--grid-mode must be 'reachable' or 'full'");
  g.state_cap = o.state_cap;
  return g;
}

inline LoadOptions load_options(const Options& o) {
  LoadOptions l;
  if (o.normalization == "auto")
    l.normalization = RewardNormalization::automatic;
  else if (o.normalization == "minmax")
    l.normalization = RewardNormalization::min_max;
  else if (o.normalization == "none")
    l.normalization = RewardNormalization::none;
  else
    throw ValidationError("--normalization must be 'auto', 'minmax' or 'none'");
  return l;
}

inline nlohmann::ordered_json model_summary(const Pomdp& m) {
  nlohmann::ordered_json j;
  j["states"] = m.num_states();
  j["actions"] = m.num_actions();
  j["observations"] = m.num_observations();
  j["rewardValues"] = m.num_rewards();
  j["discount"] = m.discount();
  j["rewardScale"] = m.data().reward_scale;
  j["rewardOffset"] = m.data().reward_offset;
  return j;
}

inline nlohmann::ordered_json diagnostics_json(const GridDiagnostics& d) {
  nlohmann::ordered_json j;
  j["rewardClamps"] = d.reward_clamps;
  j["coefficientClamps"] = d.coefficient_clamps;
  j["maxCoefficientClamp"] = d.max_coefficient_clamp;
  j["droppedBranches"] = d.dropped_branches;
  j["deadEnds"] = d.dead_ends;
  return j;
}

inline nlohmann::ordered_json verdict(const std::string& name, double bound, double gap) {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["bound"] = bound;
  j["measuredGap"] = gap;
  j["holds"] = gap <= bound;
  return j;
}

struct RankRun {
  std::optional<SpannerBasis> spanner;
  std::optional<CoreDecomposition> basis;
  SignalDynamics dynamics;
  std::optional<GridMdp> grid;
  PlanResult result;
  nlohmann::ordered_json timings;
};

inline RankRun run_rank_planner(const Pomdp& model, const Options& o, double epsilon, Stage& stage) {
  RankRun run;
  Stopwatch clock;
  stage("basis discovery");
  run.basis.emplace(discover_basis(model));
  run.timings["discoverBasis"] = clock.lap();
  stage("spanner");
  run.spanner.emplace(improve_to_spanner(*run.basis));
  run.timings["spanner"] = clock.lap();
  stage("signal dynamics");
  std::optional<SignalDynamics> cached;
  std::uint64_t model_hash = 0, spanner_hash = 0;
  if (!o.dynamics_cache.empty()) {
    model_hash = fnv1a(to_json(model).dump());
    spanner_hash = fnv1a(to_json(*run.spanner).dump());
    cached = load_dynamics_cache(o.dynamics_cache, model_hash, spanner_hash);
  }
  if (cached) {
    run.dynamics = std::move(*cached);
  } else {
    run.dynamics = precompute_dynamics(model, *run.spanner);
    if (!o.dynamics_cache.empty()) save_dynamics_cache(o.dynamics_cache, run.dynamics, model_hash, spanner_hash);
  }
  run.timings["dynamics"] = clock.lap();
  run.timings["dynamicsCacheHit"] = cached.has_value();
  stage("grid construction");
  run.grid.emplace(build_grid(model, *run.spanner, run.dynamics, epsilon, grid_options(o)));
  run.timings["buildGrid"] = clock.lap();
  stage("value iteration");
  run.result = solve(*run.grid, o.vi_tol);
  run.timings["solve"] = clock.lap();
  return run;
}

struct BaselineRun {
  std::optional<SimplexGrid> grid;
  PlanResult result;
  nlohmann::ordered_json timings;
};

inline BaselineRun run_baseline(const Pomdp& model, const Options& o, double delta, Stage& stage) {
  BaselineRun run;
  Stopwatch clock;
  stage("simplex grid construction");
  run.grid.emplace(build_delta_grid(model, delta, grid_options(o)));
  run.timings["buildGrid"] = clock.lap();
  stage("value iteration");
  run.result = solve_baseline(*run.grid, o.vi_tol);
  run.timings["solve"] = clock.lap();
  return run;
}

struct OracleRun {
  std::size_t horizon = 0;
  double slack = 0.0;
  double optimum = 0.0;
  std::unique_ptr<ExactOracle> oracle;
};

inline OracleRun start_oracle(const Pomdp& model, const Options& o, Stage& stage) {
  stage("oracle");
  OracleRun run;
  run.horizon = horizon_for_slack(model.discount(), o.oracle_slack);
  run.slack = truncation_slack(model.discount(), run.horizon);
  run.oracle = std::make_unique<ExactOracle>(model);
  run.optimum = run.oracle->value(model.initial_belief(), run.horizon).value;
  return run;
}

inline nlohmann::ordered_json oracle_json(const OracleRun& run) {
  nlohmann::ordered_json j;
  j["horizon"] = run.horizon;
  j["truncationSlack"] = run.slack;
  j["optimalValue"] = run.optimum;
  return j;
}

inline nlohmann::ordered_json monte_carlo_json(const Pomdp& model, const Options& o, const BeliefPolicy& policy) {
  std::size_t horizon = o.episode_horizon;
  if (horizon == 0) horizon = horizon_for_slack(model.discount(), 1e-3) + 1;
  nlohmann::ordered_json j;
  j["episodes"] = o.episodes;
  j["horizon"] = horizon;
  j["seed"] = o.seed;
  j["meanReturn"] = monte_carlo_return(model, model.initial_belief(), policy, horizon, o.episodes, o.seed);
  return j;
}

inline nlohmann::ordered_json settings_json(const Options& o) {
  nlohmann::ordered_json j;
  j["epsilon"] = o.epsilon;
  j["delta"] = o.delta;
  j["viTol"] = o.vi_tol;
  j["oracleSlack"] = o.oracle_slack;
  j["gridMode"] = o.grid_mode;
  j["stateCap"] = o.state_cap;
  j["seed"] = o.seed;
  j["normalization"] = o.normalization;
  return j;
}

inline double rank_bound(double epsilon, double gamma) { return epsilon / std::pow(1.0 - gamma, 4); }
inline double baseline_bound(double delta, double gamma) { return 2.0 * delta / std::pow(1.0 - gamma, 3); }

struct Outputs {
  std::vector<std::pair<std::string, std::string>> files;
  std::string stdout_text;
};

inline std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

inline void emit_report(Outputs& out, const Options& o, const nlohmann::ordered_json& report) {
  if (o.json_out.empty())
    out.stdout_text += dump(report);
  else
    out.files.emplace_back(o.json_out, dump(report));
}

inline nlohmann::ordered_json rank_section(const RankRun& run) {
  nlohmann::ordered_json j;
  j["rank"] = run.spanner->decomposition.rank();
  j["basis"] = to_json(*run.basis);
  j["spanner"] = to_json(*run.spanner);
  j["maxStateCoefficient"] = max_state_coefficient(run.spanner->decomposition);
  nlohmann::ordered_json grid;
  grid["states"] = run.grid->states.size();
  grid["mesh"] = run.grid->mesh;
  grid["maxLatticeIndex"] = max_lattice_index(run.grid->mesh);
  grid["fullLatticeSize"] = static_cast<double>(full_lattice_size(run.grid->rank, run.grid->mesh));
  grid["diagnostics"] = diagnostics_json(run.grid->diagnostics);
  j["grid"] = std::move(grid);
  j["bellmanResidual"] = run.result.residual;
  j["iterations"] = run.result.iterations;
  j["plannerValue"] = run.result.values[run.grid->initial];
  return j;
}

inline nlohmann::ordered_json baseline_section(const BaselineRun& run) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json grid;
  grid["states"] = run.grid->states.size();
  grid["delta"] = run.grid->delta;
  grid["fullLatticeSize"] = static_cast<double>(simplex_lattice_size(run.grid->states.front().size(), run.grid->resolution));
  grid["diagnostics"] = diagnostics_json(run.grid->diagnostics);
  j["grid"] = std::move(grid);
  j["bellmanResidual"] = run.result.residual;
  j["iterations"] = run.result.iterations;
  j["plannerValue"] = run.result.values[run.grid->initial];
  return j;
}

inline nlohmann::ordered_json base_report(const std::string& command, const Pomdp& model, const Options& o) {
  nlohmann::ordered_json r;
  r["schemaVersion"] = kSchemaVersion;
  r["command"] = command;
  r["model"] = model_summary(model);
  r["settings"] = settings_json(o);
  return r;
}

inline nlohmann::ordered_json policy_document(const nlohmann::ordered_json& body) {
  nlohmann::ordered_json j;
  j["schemaVersion"] = kSchemaVersion;
  for (const auto& [k, v] : body.items()) j[k] = v;
  return j;
}

inline void cmd_plan(const Pomdp& model, const Options& o, Stage& stage, Outputs& out) {
  RankRun run = run_rank_planner(model, o, o.epsilon, stage);
  nlohmann::ordered_json report = base_report("plan", model, o);
  const nlohmann::ordered_json section = rank_section(run);
  for (const auto& [k, v] : section.items()) report[k] = v;
  const BeliefPolicy policy = [&](const Belief& b) { return act_detailed(*run.spanner, *run.grid, run.result, b).action; };
  if (o.oracle) {
    OracleRun oracle = start_oracle(model, o, stage);
    const double value = oracle.oracle->evaluate([&](const Belief& b, std::size_t) { return policy(b); },
                                                 model.initial_belief(), oracle.horizon);
    nlohmann::ordered_json oj = oracle_json(oracle);
    oj["policyValue"] = value;
    oj["gap"] = oracle.optimum - value;
    oj["verdicts"] = nlohmann::ordered_json::array(
        {verdict("rankPlanner", rank_bound(o.epsilon, model.discount()) + 2.0 * oracle.slack, oracle.optimum - value)});
    report["oracle"] = std::move(oj);
  }
  if (o.episodes > 0) {
    stage("simulation");
    report["monteCarlo"] = monte_carlo_json(model, o, policy);
  }
  if (!o.no_timings) report["timings"] = run.timings;
  emit_report(out, o, report);
  if (!o.policy_out.empty())
    out.files.emplace_back(o.policy_out, dump(policy_document(to_json(*run.grid, run.result, model.data().actions))));
}

inline void cmd_baseline(const Pomdp& model, const Options& o, Stage& stage, Outputs& out) {
  BaselineRun run = run_baseline(model, o, o.delta, stage);
  nlohmann::ordered_json report = base_report("baseline", model, o);
  const nlohmann::ordered_json section = baseline_section(run);
  for (const auto& [k, v] : section.items()) report[k] = v;
  const BeliefPolicy policy = [&](const Belief& b) { return act_baseline(*run.grid, run.result, b); };
  if (o.oracle) {
    OracleRun oracle = start_oracle(model, o, stage);
    const double value = oracle.oracle->evaluate([&](const Belief& b, std::size_t) { return policy(b); },
                                                 model.initial_belief(), oracle.horizon);
    nlohmann::ordered_json oj = oracle_json(oracle);
    oj["policyValue"] = value;
    oj["gap"] = oracle.optimum - value;
    oj["verdicts"] = nlohmann::ordered_json::array(
        {verdict("simplexGrid", baseline_bound(o.delta, model.discount()) + 2.0 * oracle.slack, oracle.optimum - value)});
    report["oracle"] = std::move(oj);
  }
  if (o.episodes > 0) {
    stage("simulation");
    report["monteCarlo"] = monte_carlo_json(model, o, policy);
  }
  if (!o.no_timings) report["timings"] = run.timings;
  emit_report(out, o, report);
  if (!o.policy_out.empty())
    out.files.emplace_back(o.policy_out, dump(policy_document(to_json(*run.grid, run.result, model.data().actions))));
}

inline void cmd_compare(const Pomdp& model, const Options& o, Stage& stage, Outputs& out) {
  RankRun rank = run_rank_planner(model, o, o.epsilon, stage);
  BaselineRun base = run_baseline(model, o, o.delta, stage);
  OracleRun oracle = start_oracle(model, o, stage);
  auto rank_policy = [&](const Belief& b, std::size_t) { return act_detailed(*rank.spanner, *rank.grid, rank.result, b).action; };
  auto base_policy = [&](const Belief& b, std::size_t) { return act_baseline(*base.grid, base.result, b); };
  const double rank_value = oracle.oracle->evaluate(rank_policy, model.initial_belief(), oracle.horizon);
  const double base_value = oracle.oracle->evaluate(base_policy, model.initial_belief(), oracle.horizon);

  nlohmann::ordered_json report = base_report("compare", model, o);
  report["oracle"] = oracle_json(oracle);
  nlohmann::ordered_json r = rank_section(rank);
  r["policyValue"] = rank_value;
  r["gap"] = oracle.optimum - rank_value;
  r["verdict"] = verdict("rankPlanner", rank_bound(o.epsilon, model.discount()) + 2.0 * oracle.slack,
                         oracle.optimum - rank_value);
  if (!o.no_timings) r["timings"] = rank.timings;
  nlohmann::ordered_json b = baseline_section(base);
  b["policyValue"] = base_value;
  b["gap"] = oracle.optimum - base_value;
  b["verdict"] = verdict("simplexGrid", baseline_bound(o.delta, model.discount()) + 2.0 * oracle.slack,
                         oracle.optimum - base_value);
  if (!o.no_timings) b["timings"] = base.timings;
  report["rankPlanner"] = std::move(r);
  report["simplexGrid"] = std::move(b);
  nlohmann::ordered_json summary;
  summary["rankGridStates"] = rank.grid->states.size();
  summary["simplexGridStates"] = base.grid->states.size();
  summary["rankGap"] = oracle.optimum - rank_value;
  summary["simplexGap"] = oracle.optimum - base_value;
  report["summary"] = std::move(summary);
  emit_report(out, o, report);
}

/// Value against mesh for both planners, one CSV row per mesh.
inline void cmd_sweep(const Pomdp& model, const Options& o, Stage& stage, Outputs& out) {
  std::optional<OracleRun> oracle;
  if (o.oracle) oracle = start_oracle(model, o, stage);
  std::ostringstream csv;
  csv.precision(12);
  csv << "# planner,mesh,grid_states,planner_value,policy_value,gap\n";
  auto row = [&](const char* name, double mesh, std::size_t states, double planner_value, auto policy) {
    csv << name << ',' << mesh << ',' << states << ',' << planner_value;
    if (oracle) {
      const double v = oracle->oracle->evaluate(policy, model.initial_belief(), oracle->horizon);
      csv << ',' << v << ',' << oracle->optimum - v;
    } else {
      csv << ",nan,nan";
    }
    csv << '\n';
  };
  for (double eps : o.epsilons) {
    RankRun run = run_rank_planner(model, o, eps, stage);
    stage("sweep evaluation");
    row("rank", eps, run.grid->states.size(), run.result.values[run.grid->initial],
        [&](const Belief& b, std::size_t) { return act_detailed(*run.spanner, *run.grid, run.result, b).action; });
  }
  for (double delta : o.deltas) {
    BaselineRun run = run_baseline(model, o, delta, stage);
    stage("sweep evaluation");
    row("simplex", delta, run.grid->states.size(), run.result.values[run.grid->initial],
        [&](const Belief& b, std::size_t) { return act_baseline(*run.grid, run.result, b); });
  }
  if (o.csv_out.empty())
    out.stdout_text += csv.str();
  else
    out.files.emplace_back(o.csv_out, csv.str());
}

}  // namespace detail

inline int run_cli(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Options o;
  CLI::App app{"Planning in POMDPs through multiplicity-automaton rank"};
  app.require_subcommand(1);

  auto common = [&](CLI::App* sub) {
    sub->add_option("model", o.model_path, "Cassandra .POMDP file or canonical .json model")->required();
    sub->add_option("--vi-tol", o.vi_tol, "Value-iteration accuracy for the finite grid MDP")->capture_default_str();
    sub->add_option("--oracle-slack", o.oracle_slack, "Truncation slack of the exact oracle")->capture_default_str();
    sub->add_option("--grid-mode", o.grid_mode, "reachable | full")->capture_default_str();
    sub->add_option("--state-cap", o.state_cap, "Maximum number of grid states")->capture_default_str();
    sub->add_option("--seed", o.seed, "Seed for Monte Carlo simulation")->capture_default_str();
    sub->add_option("--episodes", o.episodes, "Monte Carlo episodes (0 disables)")->capture_default_str();
    sub->add_option("--episode-horizon", o.episode_horizon, "Steps per Monte Carlo episode (0: automatic)");
    sub->add_option("--normalization", o.normalization, "Reward normalization: auto | minmax | none")->capture_default_str();
    sub->add_flag("--no-timings", o.no_timings, "Omit timings so reports are byte-reproducible");
    sub->add_option("--json-out", o.json_out, "Write the report here instead of standard output");
  };

  auto* plan_cmd = app.add_subcommand("plan", "Rank-r planner over the modified belief MDP");
  common(plan_cmd);
  plan_cmd->add_option("--epsilon", o.epsilon, "Grid accuracy epsilon")->capture_default_str();
  plan_cmd->add_option("--policy-out", o.policy_out, "Write the grid policy JSON here");
  plan_cmd->add_option("--dynamics-cache", o.dynamics_cache, "Binary cache for the basis-state dynamics");
  plan_cmd->add_flag("--oracle", o.oracle, "Evaluate the policy with the exact oracle");

  auto* base_cmd = app.add_subcommand("baseline", "Simplex grid planner");
  common(base_cmd);
  base_cmd->add_option("--delta", o.delta, "Simplex grid mesh (1/delta must be an integer)")->capture_default_str();
  base_cmd->add_option("--policy-out", o.policy_out, "Write the grid policy JSON here");
  base_cmd->add_flag("--oracle", o.oracle, "Evaluate the policy with the exact oracle");

  auto* cmp_cmd = app.add_subcommand("compare", "Both planners and the oracle side by side");
  common(cmp_cmd);
  cmp_cmd->add_option("--epsilon", o.epsilon, "Grid accuracy epsilon")->capture_default_str();
  cmp_cmd->add_option("--delta", o.delta, "Simplex grid mesh")->capture_default_str();
  cmp_cmd->add_option("--dynamics-cache", o.dynamics_cache, "Binary cache for the basis-state dynamics");

  auto* sweep_cmd = app.add_subcommand("sweep", "CSV of value against mesh for both planners");
  common(sweep_cmd);
  sweep_cmd->add_option("--epsilons", o.epsilons, "Epsilons for the rank planner")->delimiter(',');
  sweep_cmd->add_option("--deltas", o.deltas, "Deltas for the simplex grid")->delimiter(',');
  sweep_cmd->add_option("--csv-out", o.csv_out, "Write the CSV here instead of standard output");
  sweep_cmd->add_flag("--oracle", o.oracle, "Add oracle-evaluated policy values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "mapomdp: " << e.what() << '\n' << "run with --help for usage\n";
    return kValidation;
  }

  detail::Stage stage;
  try {
    stage("load");
    const Pomdp model = load_pomdp(o.model_path, detail::load_options(o));
    detail::grid_options(o);
    detail::Outputs outputs;
    if (plan_cmd->parsed())
      detail::cmd_plan(model, o, stage, outputs);
    else if (base_cmd->parsed())
      detail::cmd_baseline(model, o, stage, outputs);
    else if (cmp_cmd->parsed())
      detail::cmd_compare(model, o, stage, outputs);
    else
      detail::cmd_sweep(model, o, stage, outputs);
    stage("output");
    for (const auto& [path, text] : outputs.files) write_atomically(path, text);
    out << outputs.stdout_text;
    return kOk;
  } catch (const ValidationError& e) {
    err << "mapomdp: " << stage.name << ": " << e.what() << '\n';
    return kValidation;
  } catch (const BudgetError& e) {
    err << "mapomdp: " << stage.name << ": " << e.what() << '\n';
    return kBudget;
  } catch (const std::exception& e) {
    err << "mapomdp: " << stage.name << ": " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace mapomdp::cli
