// Acceptance suite: one PASS/FAIL line per criterion. Items marked FLAG are
// reported for inspection and do not fail the run.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <mapomdp.hpp>
#include <mapomdp/cli.hpp>

using namespace mapomdp;

namespace {

int failures = 0;

void verdict(const char* id, bool ok, const std::string& detail) {
  std::printf("%s %s %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void flag(const char* id, const std::string& detail) { std::printf("%s FLAG %s\n", id, detail.c_str()); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Belief random_belief(std::mt19937_64& rng, std::size_t n) {
  std::exponential_distribution<double> e(1.0);
  Belief b(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = e(rng);
  return b / b.sum();
}

// Forward filter written against T and OB entries directly, sharing nothing
// with the joint matrices the automaton and the library filter use.
struct HandFilter {
  const Pomdp& m;
  double step(Belief& b, std::size_t a, std::size_t z) const {
    const std::size_t n = m.num_states();
    Belief next = Belief::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t t = 0; t < n; ++t)
        next(static_cast<Eigen::Index>(t)) +=
            b(static_cast<Eigen::Index>(s)) * m.transition(s, a, t) * m.signal_probability(s, a, t, z);
    const double p = next.sum();
    if (p > 0) b = next / p;
    return p;
  }
  double probability(Belief b, const std::vector<std::size_t>& word) const {
    double total = 1.0;
    for (std::size_t sym : word) {
      const Step s = m.step_at(sym);
      total *= step(b, s.action, m.signal_index(s.signal));
      if (total == 0.0) return 0.0;
    }
    return total;
  }
};

std::vector<std::vector<std::size_t>> words_up_to(std::size_t symbols, std::size_t max_len) {
  std::vector<std::vector<std::size_t>> out{{}};
  std::vector<std::vector<std::size_t>> layer{{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::vector<std::size_t>> next;
    for (const auto& w : layer)
      for (std::size_t s = 0; s < symbols; ++s) {
        auto x = w;
        x.push_back(s);
        next.push_back(std::move(x));
      }
    out.insert(out.end(), next.begin(), next.end());
    layer = std::move(next);
  }
  return out;
}

struct Named {
  std::string name;
  Pomdp model;
};

std::vector<Named> structure_corpus() {
  std::vector<Named> out{{"tiger", models::tiger()},
                         {"coin", models::fair_coin()},
                         {"duplicated", models::duplicated_states()},
                         {"observable3", models::fully_observable(3)},
                         {"mixture-near", models::mixture_chain(true)},
                         {"mixture", models::mixture_chain(false)}};
  for (std::uint64_t s = 0; s < 10; ++s) out.push_back({"desk" + std::to_string(s), models::desk_random_pomdp(s)});
  for (std::uint64_t s = 0; s < 10; ++s)
    out.push_back({"random" + std::to_string(s),
                   models::random_pomdp(100 + s, {.states = 2 + s % 5, .actions = 2, .observations = 2, .rewards = 2,
                                                  .departure_dependent = s % 2 == 0})});
  return out;
}

std::vector<Named> planning_corpus() {
  std::vector<Named> out{{"tiger", models::tiger(0.75)}};
  for (std::uint64_t s = 0; s < 10; ++s) out.push_back({"desk" + std::to_string(s), models::desk_random_pomdp(s)});
  return out;
}

/// Hankel rank over tests of growing length until it stops growing.
std::size_t stabilized_hankel_rank(const Pomdp& m) {
  std::size_t prev = hankel_rank(m, 0);
  for (std::size_t len = 1; len <= m.num_states(); ++len) {
    const std::size_t r = hankel_rank(m, len);
    if (r == prev) return r;
    prev = r;
  }
  return prev;
}

void a1() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t words = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    models::RandomModelSpec spec{.states = 1 + seed % 6,
                         .actions = 1 + seed % 3,
                         .observations = 1 + (seed / 3) % 3,
                         .rewards = 1 + (seed / 9) % 2,
                         .departure_dependent = seed % 2 == 1};
    const Pomdp m = models::random_pomdp(seed, spec);
    const auto ma = from_pomdp(m);
    const HandFilter filter{m};
    for (const auto& w : words_up_to(m.num_symbols(), 4)) {
      worst = std::max(worst, std::abs(ma.evaluate(w) - filter.probability(m.initial_belief(), w)));
      ++words;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  verdict("A1", worst <= 1e-10 && secs <= 60.0,
          fmt("automaton vs forward filter: %zu words on 50 models, max error %.3g, %.2f s", words, worst, secs));
}

void a2() {
  const auto ma = contains_ab_automaton();
  std::size_t checked = 0, mismatches = 0;
  std::vector<std::string> layer{""};
  for (int len = 1; len <= 5; ++len) {
    std::vector<std::string> next;
    for (const auto& w : layer)
      for (char c : std::string("abcd")) next.push_back(w + c);
    for (const auto& w : next) {
      ++checked;
      if (ma.evaluate(w) != (w.find("ab") != std::string::npos ? 1.0 : 0.0)) ++mismatches;
    }
    layer = std::move(next);
  }
  verdict("A2", checked == 1364 && mismatches == 0,
          fmt("contains-ab automaton: %zu strings, %zu mismatches", checked, mismatches));
}

void a3() {
  bool ok = true;
  std::string bad;
  for (const auto& [name, m] : structure_corpus()) {
    const auto d = discover_basis(m);
    const std::size_t h = stabilized_hankel_rank(m);
    if (d.rank() > m.num_states() || d.rank() != h) {
      ok = false;
      bad += fmt(" %s(r=%zu,hankel=%zu,n=%zu)", name.c_str(), d.rank(), h, m.num_states());
    }
  }
  const std::size_t dup = discover_basis(models::duplicated_states()).rank();
  ok = ok && dup <= 3;
  verdict("A3", ok, fmt("r <= n and r == stabilized Hankel rank on %zu models; duplicated-state model r=%zu%s",
                        structure_corpus().size(), dup, bad.c_str()));
}

void a4() {
  bool ok = true;
  double worst_coef = 0.0, worst_ratio = INFINITY;
  std::size_t total_swaps = 0;
  std::string flags;
  for (const auto& [name, m] : structure_corpus()) {
    const auto sp = improve_to_spanner(discover_basis(m));
    worst_coef = std::max(worst_coef, max_state_coefficient(sp.decomposition));
    for (std::size_t k = 1; k < sp.log_det_ledger.size(); ++k) {
      const double ratio = std::exp(sp.log_det_ledger[k] - sp.log_det_ledger[k - 1]);
      worst_ratio = std::min(worst_ratio, ratio);
      if (!(ratio >= 2.0 - 1e-9)) ok = false;
    }
    total_swaps += sp.swaps.size();
    const double r = static_cast<double>(sp.decomposition.rank());
    const double ceiling = 5.0 * r * std::ceil(std::log2(r) + 4.0);
    if (static_cast<double>(sp.swaps.size()) > ceiling) flags += fmt(" %s(%zu>%g)", name.c_str(), sp.swaps.size(), ceiling);
  }
  ok = ok && worst_coef <= 2.0 + 1e-6;
  verdict("A4", ok,
          fmt("spanner: max |coefficient| %.6f, %zu swaps, min per-swap det ratio %s", worst_coef, total_swaps,
              std::isinf(worst_ratio) ? "n/a" : fmt("%.4f", worst_ratio).c_str()));
  if (!flags.empty()) flag("A4", "swap count above empirical ceiling:" + flags);
}

struct PlanningGap {
  std::string name;
  double gap;
  double allowed;
};

void planning_bounds() {
  const double epsilon = 0.1, delta = 0.05, slack_target = 1e-2;
  bool ok5 = true, ok6 = true;
  std::string detail5, detail6, flags5;
  double worst5 = -INFINITY, worst6 = -INFINITY;
  for (const auto& [name, m] : planning_corpus()) {
    const double gamma = m.discount();
    const std::size_t h = horizon_for_slack(gamma, slack_target);
    const double slack = truncation_slack(gamma, h);
    ExactOracle oracle(m);
    const double opt = oracle.value(m.initial_belief(), h).value;

    const RankPlan p = plan(m, epsilon, 1e-4);
    const double pv = oracle.evaluate(
        [&](const Belief& b, std::size_t) { return act_detailed(p.spanner, p.grid, p.result, b).action; },
        m.initial_belief(), h);
    const double gap5 = opt - pv;
    const double bound5 = epsilon / std::pow(1 - gamma, 4) + 2 * slack;
    ok5 = ok5 && gap5 <= bound5;
    worst5 = std::max(worst5, gap5);
    detail5 += fmt(" %s:%.4f", name.c_str(), gap5);
    if (gap5 > 0.05 / (1 - gamma)) flags5 += fmt(" %s(gap %.4f > %.4f)", name.c_str(), gap5, 0.05 / (1 - gamma));

    const auto g = build_delta_grid(m, delta);
    const auto r = solve_baseline(g, 1e-4);
    const double bv = oracle.evaluate([&](const Belief& b, std::size_t) { return act_baseline(g, r, b); },
                                      m.initial_belief(), h);
    const double gap6 = opt - bv;
    const double bound6 = 2 * delta / std::pow(1 - gamma, 3) + 2 * slack;
    ok6 = ok6 && gap6 <= bound6;
    worst6 = std::max(worst6, gap6);
    detail6 += fmt(" %s:%.4f", name.c_str(), gap6);
  }
  verdict("A5", ok5, fmt("rank planner (eps 0.1) oracle gap within bound on tiger + 10 desk models; worst gap %.4f; gaps%s",
                         worst5, detail5.c_str()));
  if (!flags5.empty()) flag("A5", "gap above 0.05/(1-gamma):" + flags5);
  verdict("A6", ok6, fmt("simplex grid (delta 0.05) oracle gap within bound; worst gap %.4f; gaps%s", worst6,
                         detail6.c_str()));
}

void a7() {
  std::mt19937_64 rng(2024);
  std::size_t checks = 0, violations = 0;
  double worst_excess = -INFINITY;
  for (const auto& [name, m] : planning_corpus()) {
    const double gamma = m.discount();
    const std::size_t h = horizon_for_slack(gamma, 1e-3);
    ExactOracle oracle(m);
    for (int pair = 0; pair < 100; ++pair) {
      const Belief x = random_belief(rng, m.num_states()), y = random_belief(rng, m.num_states());
      const double allowed = (x - y).lpNorm<1>() / (1 - gamma) + 2e-3;
      for (std::size_t a = 0; a < m.num_actions(); ++a) {
        const double diff = std::abs(oracle.q(x, a, h) - oracle.q(y, a, h));
        worst_excess = std::max(worst_excess, diff - allowed);
        ++checks;
        if (diff > allowed) ++violations;
      }
    }
  }
  verdict("A7", violations == 0,
          fmt("Q Lipschitz audit: %zu checks, %zu violations, max (diff - allowed) %.4g", checks, violations,
              worst_excess));
}

void a8() {
  const double epsilon = 0.1;
  bool ok = true;
  std::string detail;
  std::vector<Named> models_r12{{"coin", models::fair_coin()}, {"tiger", models::tiger()}};
  for (std::uint64_t s = 0; s < 10; ++s) {
    Pomdp m = models::desk_random_pomdp(s);
    if (discover_basis(m).rank() <= 2) models_r12.push_back({"desk" + std::to_string(s), std::move(m)});
  }
  for (const auto& [name, m] : models_r12) {
    PlanOptions full;
    full.grid.mode = GridMode::full;
    const RankPlan f = plan(m, epsilon, 1e-3, full);
    const std::size_t r = f.grid.rank;
    if (r > 2) continue;
    const auto side = static_cast<std::size_t>(2 * std::floor(2.0 * static_cast<double>(r) / epsilon + 1e-9) + 1);
    const std::size_t expected = r == 1 ? side : side * side;
    const RankPlan reach = plan(m, epsilon, 1e-3);
    bool subset = reach.grid.states.size() <= f.grid.states.size();
    for (const auto& g : reach.grid.states) subset = subset && f.grid.find(g).has_value();
    ok = ok && f.grid.states.size() == expected && subset;
    detail += fmt(" %s(r=%zu full=%zu expected=%zu reachable=%zu)", name.c_str(), r, f.grid.states.size(), expected,
                  reach.grid.states.size());
  }
  verdict("A8", ok, "full-lattice counts and reachable subsets:" + detail);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void a9() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "mapomdp_acceptance_a9";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto run = [&](const std::string& tag) {
    std::vector<std::string> args{"mapomdp", "plan", std::string(MAPOMDP_DATA_DIR) + "/tiger.POMDP", "--epsilon", "0.1",
                                  "--seed", "17", "--episodes", "200", "--oracle", "--no-timings",
                                  "--json-out", (dir / ("report" + tag + ".json")).string(),
                                  "--policy-out", (dir / ("policy" + tag + ".json")).string()};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    return cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  };
  const int c1 = run("1"), c2 = run("2");
  const std::string r1 = slurp(dir / "report1.json"), r2 = slurp(dir / "report2.json");
  const std::string p1 = slurp(dir / "policy1.json"), p2 = slurp(dir / "policy2.json");
  fs::remove_all(dir);
  verdict("A9", c1 == 0 && c2 == 0 && !r1.empty() && !p1.empty() && r1 == r2 && p1 == p2,
          fmt("two plan runs: exit codes %d/%d, report %zu bytes %s, policy %zu bytes %s", c1, c2, r1.size(),
              r1 == r2 ? "identical" : "DIFFERENT", p1.size(), p1 == p2 ? "identical" : "DIFFERENT"));
}

void a10() {
  std::mt19937_64 rng(10);
  const double tol = 1e-10;
  std::size_t consistency_bad = 0, linearity_bad = 0, chain_bad = 0;
  double worst_c = 0, worst_l = 0, worst_ch = 0;
  auto random_model = [&](std::size_t k) {
    models::RandomModelSpec spec{.states = 1 + k % 6, .actions = 1 + k % 3, .observations = 1 + (k / 2) % 3,
                         .rewards = 1 + (k / 3) % 2, .departure_dependent = k % 2 == 0};
    return models::random_pomdp(rng(), spec);
  };
  auto random_test = [&](const Pomdp& m, std::size_t len) {
    Test t;
    std::uniform_int_distribution<std::size_t> sym(0, m.num_symbols() - 1);
    for (std::size_t i = 0; i < len; ++i) t.push_back(m.step_at(sym(rng)));
    return t;
  };
  for (std::size_t k = 0; k < 1000; ++k) {
    // Filter consistency: the library update agrees with hand Bayes and signal
    // probabilities form a distribution.
    const Pomdp m = random_model(k);
    const Belief b = random_belief(rng, m.num_states());
    const std::size_t a = std::uniform_int_distribution<std::size_t>(0, m.num_actions() - 1)(rng);
    double total = 0.0, err = 0.0;
    for (std::size_t z = 0; z < m.num_signals(); ++z) {
      Belief hand = b;
      const double p = HandFilter{m}.step(hand, a, z);
      const auto lib = belief_update(m, b, a, z);
      total += lib.probability;
      err = std::max(err, std::abs(p - lib.probability));
      if (lib.posterior) err = std::max(err, (*lib.posterior - hand).lpNorm<Eigen::Infinity>());
    }
    err = std::max(err, std::abs(total - 1.0));
    worst_c = std::max(worst_c, err);
    if (err > tol) ++consistency_bad;
  }
  for (std::size_t k = 0; k < 1000; ++k) {
    const Pomdp m = random_model(k);
    const Belief x = random_belief(rng, m.num_states()), y = random_belief(rng, m.num_states());
    const double lambda = std::uniform_real_distribution<double>(0, 1)(rng);
    const Test t = random_test(m, 1 + k % 4);
    const double lhs = sequence_probability(m, lambda * x + (1 - lambda) * y, t);
    const double rhs = lambda * sequence_probability(m, x, t) + (1 - lambda) * sequence_probability(m, y, t);
    worst_l = std::max(worst_l, std::abs(lhs - rhs));
    if (std::abs(lhs - rhs) > tol) ++linearity_bad;
  }
  for (std::size_t k = 0; k < 1000; ++k) {
    const Pomdp m = random_model(k);
    const Belief b = random_belief(rng, m.num_states());
    const Test u = random_test(m, 1 + k % 3), v = random_test(m, 1 + (k / 3) % 3);
    Test uv = u;
    uv.insert(uv.end(), v.begin(), v.end());
    const double pu = sequence_probability(m, b, u);
    double rhs = 0.0;
    if (pu > 0.0) {
      Belief after = b;
      for (const Step& s : u) after = *belief_update(m, after, s.action, s.signal).posterior;
      rhs = pu * sequence_probability(m, after, v);
    }
    const double diff = std::abs(sequence_probability(m, b, uv) - rhs);
    worst_ch = std::max(worst_ch, diff);
    if (diff > tol) ++chain_bad;
  }
  verdict("A10", consistency_bad + linearity_bad + chain_bad == 0,
          fmt("1000 cases each: consistency %zu bad (max %.2g), linearity %zu bad (max %.2g), chain rule %zu bad "
              "(max %.2g)",
              consistency_bad, worst_c, linearity_bad, worst_l, chain_bad, worst_ch));
}

}  // namespace

int main() {
  set_warning_sink({});
  a1();
  a2();
  a3();
  a4();
  planning_bounds();
  a7();
  a8();
  a9();
  a10();
  std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
