#pragma once

// Reader and writer for Cassandra-style `.POMDP` text files.
//
// Supported: discount, values (reward only), states/actions/observations as a
// count or a name list, start (probability list, `uniform`, a single state,
// `include:` / `exclude:` lists), and T:/O:/R: entries in their single-value,
// row and matrix forms with `*` wildcards. Later entries override earlier ones.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mapomdp/errors.hpp"
#include "mapomdp/pomdp.hpp"

namespace mapomdp {

enum class RewardNormalization {
  automatic,  // identity when all rewards already lie in [0,1], min-max otherwise
  min_max,
  none,       // rewards must already lie in [0,1]
};

struct LoadOptions {
  RewardNormalization normalization = RewardNormalization::automatic;
  std::size_t max_reward_values = 64;
  double stochastic_tolerance = 1e-9;
};

namespace detail {

struct Token {
  std::string text;
  std::size_t line = 0;
  std::size_t column = 0;
};

inline std::vector<Token> tokenize_cassandra(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t line = 1, col = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
      continue;
    }
    if (c == '\n') {
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      ++col;
      continue;
    }
    if (c == ':') {
      tokens.push_back({":", line, col});
      ++i;
      ++col;
      continue;
    }
    const std::size_t start = i;
    const std::size_t start_col = col;
    while (i < text.size() && text[i] != ':' && text[i] != '#' && !std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
      ++col;
    }
    tokens.push_back({std::string(text.substr(start, i - start)), line, start_col});
  }
  return tokens;
}

inline std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) return std::nullopt;
  return value;
}

inline bool is_keyword(const std::string& s) {
  return s == "discount" || s == "values" || s == "states" || s == "actions" || s == "observations" || s == "start" ||
         s == "T" || s == "O" || s == "R";
}

class CassandraParser {
 public:
  explicit CassandraParser(std::string_view text) : tokens_(tokenize_cassandra(text)) {}

  struct Raw {
    double discount = -1.0;
    std::vector<std::string> states, actions, observations;
    std::vector<Eigen::MatrixXd> transition;         // [a](s, s')
    std::vector<Eigen::MatrixXd> observation;        // [a](s', o)
    std::vector<double> reward;                      // [a][s][s'][o]
    std::optional<Eigen::VectorXd> start;
  };

  Raw parse() {
    while (!at_end()) {
      const Token& kw = next();
      if (kw.text == "discount") {
        expect_colon();
        raw_.discount = number();
      } else if (kw.text == "values") {
        expect_colon();
        const Token& v = next();
        if (v.text == "cost") fail(v, "unsupported construct 'values: cost' (only rewards are supported)");
        if (v.text != "reward") fail(v, "expected 'reward' after 'values:'");
      } else if (kw.text == "states") {
        expect_colon();
        raw_.states = name_list(kw);
      } else if (kw.text == "actions") {
        expect_colon();
        raw_.actions = name_list(kw);
      } else if (kw.text == "observations") {
        expect_colon();
        raw_.observations = name_list(kw);
      } else if (kw.text == "start") {
        parse_start(kw);
      } else if (kw.text == "T") {
        parse_transition(kw);
      } else if (kw.text == "O") {
        parse_observation(kw);
      } else if (kw.text == "R") {
        parse_reward(kw);
      } else if (kw.text == "E") {
        fail(kw, "unsupported construct 'E:' entries");
      } else {
        fail(kw, "unexpected token '" + kw.text + "'");
      }
    }
    if (raw_.discount < 0.0) fail_eof("missing 'discount:'");
    if (raw_.states.empty()) fail_eof("missing 'states:'");
    if (raw_.actions.empty()) fail_eof("missing 'actions:'");
    if (raw_.observations.empty()) fail_eof("missing 'observations:'");
    ensure_tables();
    return std::move(raw_);
  }

 private:
  bool at_end() const { return pos_ >= tokens_.size(); }
  const Token& peek() const { return tokens_[pos_]; }
  const Token& next() {
    if (at_end()) fail_eof("unexpected end of file");
    return tokens_[pos_++];
  }

  [[noreturn]] void fail(const Token& t, const std::string& what) const { throw ParseError(t.line, t.column, what); }
  [[noreturn]] void fail_eof(const std::string& what) const {
    const std::size_t line = tokens_.empty() ? 1 : tokens_.back().line;
    const std::size_t col = tokens_.empty() ? 1 : tokens_.back().column + tokens_.back().text.size();
    throw ParseError(line, col, what);
  }

  void expect_colon() {
    const Token& t = next();
    if (t.text != ":") fail(t, "expected ':'");
  }

  double number() {
    const Token& t = next();
    auto v = parse_number(t.text);
    if (!v) fail(t, "expected a number, got '" + t.text + "'");
    return *v;
  }

  std::vector<std::string> name_list(const Token& kw) {
    std::vector<const Token*> items;
    while (!at_end() && !is_keyword(peek().text)) {
      if (peek().text == ":") fail(peek(), "unexpected ':'");
      items.push_back(&next());
    }
    if (items.empty()) fail(kw, "empty list after '" + kw.text + ":'");
    std::vector<std::string> names;
    if (items.size() == 1) {
      std::size_t count = 0;
      const auto& s = items[0]->text;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), count);
      if (ec == std::errc{} && ptr == s.data() + s.size()) {
        if (count == 0) fail(*items[0], "count must be positive");
        for (std::size_t i = 0; i < count; ++i) names.push_back(std::to_string(i));
        return names;
      }
    }
    for (const Token* t : items) {
      if (std::find(names.begin(), names.end(), t->text) != names.end()) fail(*t, "duplicate name '" + t->text + "'");
      names.push_back(t->text);
    }
    return names;
  }

  void require_header(const Token& t) const {
    if (raw_.states.empty() || raw_.actions.empty() || raw_.observations.empty())
      fail(t, "'" + t.text + ":' entry before states/actions/observations are declared");
  }

  void ensure_tables() {
    const std::size_t n = raw_.states.size();
    const std::size_t na = raw_.actions.size();
    const std::size_t no = raw_.observations.size();
    if (raw_.transition.empty()) raw_.transition.assign(na, Eigen::MatrixXd::Zero(n, n));
    if (raw_.observation.empty()) raw_.observation.assign(na, Eigen::MatrixXd::Zero(n, no));
    if (raw_.reward.empty()) raw_.reward.assign(na * n * n * no, 0.0);
  }

  /// Resolves a name, an index or `*` to the list of matching positions.
  std::vector<std::size_t> resolve(const Token& t, const std::vector<std::string>& names) const {
    std::vector<std::size_t> out;
    if (t.text == "*") {
      for (std::size_t i = 0; i < names.size(); ++i) out.push_back(i);
      return out;
    }
    auto it = std::find(names.begin(), names.end(), t.text);
    if (it != names.end()) return {static_cast<std::size_t>(it - names.begin())};
    std::size_t idx = 0;
    auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), idx);
    if (ec == std::errc{} && ptr == t.text.data() + t.text.size() && idx < names.size()) return {idx};
    fail(t, "unknown identifier '" + t.text + "'");
  }

  /// Reads `: id (: id)*` up to `max_ids` identifiers and returns the identifier tokens.
  std::vector<const Token*> id_path(std::size_t max_ids) {
    std::vector<const Token*> ids;
    expect_colon();
    ids.push_back(&next());
    while (ids.size() < max_ids && !at_end() && peek().text == ":") {
      ++pos_;
      ids.push_back(&next());
    }
    return ids;
  }

  std::vector<double> numbers(std::size_t count) {
    std::vector<double> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(number());
    return out;
  }

  bool next_is(const char* word) const { return !at_end() && peek().text == word; }

  void parse_start(const Token& kw) {
    require_header(kw);
    const std::size_t n = raw_.states.size();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    if (next_is("include") || next_is("exclude")) {
      const bool include = next().text == "include";
      expect_colon();
      std::vector<bool> listed(n, false);
      bool any = false;
      while (!at_end() && !is_keyword(peek().text)) {
        for (std::size_t s : resolve(next(), raw_.states)) listed[s] = true;
        any = true;
      }
      if (!any) fail(kw, "empty state list in start entry");
      std::size_t count = 0;
      for (std::size_t s = 0; s < n; ++s)
        if (listed[s] == include) ++count;
      if (count == 0) fail(kw, "start entry leaves no states");
      for (std::size_t s = 0; s < n; ++s)
        if (listed[s] == include) b(s) = 1.0 / static_cast<double>(count);
      raw_.start = b;
      return;
    }
    expect_colon();
    if (next_is("uniform")) {
      ++pos_;
      raw_.start = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
      return;
    }
    if (!at_end() && !parse_number(peek().text)) {
      for (std::size_t s : resolve(next(), raw_.states)) b(s) = 1.0;
      b /= b.sum();
      raw_.start = b;
      return;
    }
    // A single integer may name a state index; n numbers form a distribution.
    std::vector<const Token*> items;
    while (!at_end() && !is_keyword(peek().text)) items.push_back(&next());
    if (items.size() == 1 && n != 1) {
      for (std::size_t s : resolve(*items[0], raw_.states)) b(s) = 1.0;
      raw_.start = b;
      return;
    }
    if (items.size() != n) fail(kw, "start distribution needs " + std::to_string(n) + " entries");
    for (std::size_t i = 0; i < n; ++i) {
      auto v = parse_number(items[i]->text);
      if (!v) fail(*items[i], "expected a number, got '" + items[i]->text + "'");
      b(i) = *v;
    }
    raw_.start = b;
  }

  void parse_transition(const Token& kw) {
    require_header(kw);
    ensure_tables();
    const std::size_t n = raw_.states.size();
    auto ids = id_path(3);
    const auto acts = resolve(*ids[0], raw_.actions);
    if (ids.size() == 3) {
      const auto from = resolve(*ids[1], raw_.states);
      const auto to = resolve(*ids[2], raw_.states);
      const double p = number();
      for (auto a : acts)
        for (auto s : from)
          for (auto t : to) raw_.transition[a](s, t) = p;
    } else if (ids.size() == 2) {
      const auto from = resolve(*ids[1], raw_.states);
      std::vector<double> row;
      if (next_is("uniform")) {
        ++pos_;
        row.assign(n, 1.0 / static_cast<double>(n));
      } else {
        row = numbers(n);
      }
      for (auto a : acts)
        for (auto s : from)
          for (std::size_t t = 0; t < n; ++t) raw_.transition[a](s, t) = row[t];
    } else {
      Eigen::MatrixXd m(n, n);
      if (next_is("uniform")) {
        ++pos_;
        m.setConstant(1.0 / static_cast<double>(n));
      } else if (next_is("identity")) {
        ++pos_;
        m.setIdentity();
      } else {
        const auto v = numbers(n * n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) m(i, j) = v[i * n + j];
      }
      for (auto a : acts) raw_.transition[a] = m;
    }
  }

  void parse_observation(const Token& kw) {
    require_header(kw);
    ensure_tables();
    const std::size_t n = raw_.states.size();
    const std::size_t no = raw_.observations.size();
    auto ids = id_path(3);
    const auto acts = resolve(*ids[0], raw_.actions);
    if (ids.size() == 3) {
      const auto to = resolve(*ids[1], raw_.states);
      const auto obs = resolve(*ids[2], raw_.observations);
      const double p = number();
      for (auto a : acts)
        for (auto t : to)
          for (auto o : obs) raw_.observation[a](t, o) = p;
    } else if (ids.size() == 2) {
      const auto to = resolve(*ids[1], raw_.states);
      std::vector<double> row;
      if (next_is("uniform")) {
        ++pos_;
        row.assign(no, 1.0 / static_cast<double>(no));
      } else {
        row = numbers(no);
      }
      for (auto a : acts)
        for (auto t : to)
          for (std::size_t o = 0; o < no; ++o) raw_.observation[a](t, o) = row[o];
    } else {
      Eigen::MatrixXd m(n, no);
      if (next_is("uniform")) {
        ++pos_;
        m.setConstant(1.0 / static_cast<double>(no));
      } else {
        const auto v = numbers(n * no);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < no; ++j) m(i, j) = v[i * no + j];
      }
      for (auto a : acts) raw_.observation[a] = m;
    }
  }

  void parse_reward(const Token& kw) {
    require_header(kw);
    ensure_tables();
    const std::size_t n = raw_.states.size();
    const std::size_t no = raw_.observations.size();
    auto ids = id_path(4);
    if (ids.size() < 2) fail(*ids[0], "R: entries need at least an action and a start state");
    const auto acts = resolve(*ids[0], raw_.actions);
    const auto from = resolve(*ids[1], raw_.states);
    auto at = [&](std::size_t a, std::size_t s, std::size_t t, std::size_t o) -> double& {
      return raw_.reward[((a * n + s) * n + t) * no + o];
    };
    if (ids.size() == 4) {
      const auto to = resolve(*ids[2], raw_.states);
      const auto obs = resolve(*ids[3], raw_.observations);
      const double v = number();
      for (auto a : acts)
        for (auto s : from)
          for (auto t : to)
            for (auto o : obs) at(a, s, t, o) = v;
    } else if (ids.size() == 3) {
      const auto to = resolve(*ids[2], raw_.states);
      const auto row = numbers(no);
      for (auto a : acts)
        for (auto s : from)
          for (auto t : to)
            for (std::size_t o = 0; o < no; ++o) at(a, s, t, o) = row[o];
    } else {
      const auto v = numbers(n * no);
      for (auto a : acts)
        for (auto s : from)
          for (std::size_t t = 0; t < n; ++t)
            for (std::size_t o = 0; o < no; ++o) at(a, s, t, o) = v[t * no + o];
    }
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  Raw raw_;
};

inline void check_and_normalize_row(Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row, double tol, const std::string& where) {
  for (Eigen::Index i = 0; i < row.size(); ++i)
    if (row(i) < 0.0) throw ValidationError(where + " has a negative probability");
  const double sum = row.sum();
  if (std::abs(sum - 1.0) > tol)
    throw ValidationError(where + " sums to " + std::to_string(sum) + " (not stochastic)");
  row /= sum;
}

}  // namespace detail

/// Builds a validated model from the parsed file contents.
inline Pomdp build_cassandra_model(detail::CassandraParser::Raw raw, const LoadOptions& options = {}) {
  const std::size_t n = raw.states.size();
  const std::size_t na = raw.actions.size();
  const std::size_t no = raw.observations.size();
  const double tol = options.stochastic_tolerance;

  for (std::size_t a = 0; a < na; ++a) {
    for (std::size_t s = 0; s < n; ++s)
      detail::check_and_normalize_row(raw.transition[a].row(s), tol,
                                      "transition row (" + raw.states[s] + ", " + raw.actions[a] + ")");
    for (std::size_t t = 0; t < n; ++t)
      detail::check_and_normalize_row(raw.observation[a].row(t), tol,
                                      "observation row (" + raw.states[t] + ", " + raw.actions[a] + ")");
  }

  Eigen::VectorXd start = raw.start.value_or(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
  {
    Eigen::RowVectorXd row = start.transpose();
    detail::check_and_normalize_row(row, tol, "start distribution");
    start = row.transpose();
  }

  auto reward_at = [&](std::size_t a, std::size_t s, std::size_t t, std::size_t o) {
    return raw.reward[((a * n + s) * n + t) * no + o];
  };

  // Distinct raw rewards over combinations that carry probability mass.
  std::vector<double> values;
  auto same = [](double x, double y) { return std::abs(x - y) <= 1e-9 * std::max(1.0, std::abs(x)); };
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t t = 0; t < n; ++t) {
        if (raw.transition[a](s, t) <= 0.0) continue;
        for (std::size_t o = 0; o < no; ++o) {
          if (raw.observation[a](t, o) <= 0.0) continue;
          const double v = reward_at(a, s, t, o);
          if (std::none_of(values.begin(), values.end(), [&](double w) { return same(v, w); })) values.push_back(v);
        }
      }
  if (values.empty()) values.push_back(0.0);
  std::sort(values.begin(), values.end());
  if (values.size() > options.max_reward_values)
    throw ValidationError("model has " + std::to_string(values.size()) + " distinct reward values, cap is " +
                          std::to_string(options.max_reward_values));

  const double lo = values.front();
  const double hi = values.back();
  double scale = 1.0, offset = 0.0;
  const bool in_unit = lo >= 0.0 && hi <= 1.0;
  switch (options.normalization) {
    case RewardNormalization::none:
      if (!in_unit) throw ValidationError("rewards outside [0,1] and normalization disabled");
      break;
    case RewardNormalization::automatic:
      if (in_unit) break;
      [[fallthrough]];
    case RewardNormalization::min_max:
      if (hi > lo) {
        scale = hi - lo;
        offset = lo;
      } else {
        offset = lo;
      }
      break;
  }

  PomdpData data;
  data.states = std::move(raw.states);
  data.actions = std::move(raw.actions);
  data.observations = std::move(raw.observations);
  for (double v : values) data.reward_values.push_back(std::clamp((v - offset) / scale, 0.0, 1.0));
  data.reward_scale = scale;
  data.reward_offset = offset;
  data.transition = std::move(raw.transition);
  data.discount = raw.discount;
  data.initial_belief = start;

  const std::size_t nr = values.size();
  const std::size_t nz = no * nr;
  data.signal_kernel.assign(na * n * n * nz, 0.0);
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t t = 0; t < n; ++t)
        for (std::size_t o = 0; o < no; ++o) {
          const double v = reward_at(a, s, t, o);
          std::size_t best = 0;
          for (std::size_t r = 1; r < nr; ++r)
            if (std::abs(values[r] - v) < std::abs(values[best] - v)) best = r;
          data.signal_kernel[((a * n + s) * n + t) * nz + o * nr + best] = raw.observation[a](t, o);
        }
  return Pomdp(std::move(data));
}

inline Pomdp parse_cassandra(std::string_view text, const LoadOptions& options = {}) {
  detail::CassandraParser parser(text);
  return build_cassandra_model(parser.parse(), options);
}

inline Pomdp load_cassandra(const std::string& path, const LoadOptions& options = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_cassandra(buffer.str(), options);
}

/// Serializes a model back to the Cassandra format with raw (denormalized)
/// rewards. Throws ValidationError when the signal kernel cannot be expressed
/// as an arrival-state observation table plus a deterministic reward per
/// (s, a, s', o).
inline std::string write_cassandra(const Pomdp& model) {
  const auto& d = model.data();
  const std::size_t n = model.num_states();
  const std::size_t nr = model.num_rewards();
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  auto join = [](const std::vector<std::string>& names) {
    bool numbered = true;
    for (std::size_t i = 0; i < names.size(); ++i) numbered = numbered && names[i] == std::to_string(i);
    if (numbered) return ' ' + std::to_string(names.size());
    std::string out;
    for (const auto& s : names) out += ' ' + s;
    return out;
  };

  std::ostringstream out;
  out << "discount: " << num(d.discount) << '\n';
  out << "values: reward\n";
  out << "states:" << join(d.states) << '\n';
  out << "actions:" << join(d.actions) << '\n';
  out << "observations:" << join(d.observations) << '\n';
  out << "start:";
  for (Eigen::Index i = 0; i < d.initial_belief.size(); ++i) out << ' ' << num(d.initial_belief(i));
  out << "\n\n";

  for (std::size_t a = 0; a < model.num_actions(); ++a)
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t t = 0; t < n; ++t)
        if (d.transition[a](s, t) != 0.0)
          out << "T: " << d.actions[a] << " : " << d.states[s] << " : " << d.states[t] << ' '
              << num(d.transition[a](s, t)) << '\n';
  out << '\n';

  for (std::size_t a = 0; a < model.num_actions(); ++a)
    for (std::size_t t = 0; t < n; ++t) {
      // Observation marginal, taken from a departing state that can reach t.
      std::size_t ref = 0;
      for (std::size_t s = 0; s < n; ++s)
        if (d.transition[a](s, t) > 0.0) {
          ref = s;
          break;
        }
      for (std::size_t o = 0; o < model.num_observations(); ++o) {
        double p = 0.0;
        for (std::size_t r = 0; r < nr; ++r) p += model.signal_probability(ref, a, t, o * nr + r);
        for (std::size_t s = 0; s < n; ++s) {
          if (d.transition[a](s, t) <= 0.0) continue;
          double q = 0.0;
          for (std::size_t r = 0; r < nr; ++r) q += model.signal_probability(s, a, t, o * nr + r);
          if (std::abs(p - q) > 1e-12)
            throw ValidationError("observation probabilities depend on the departing state; not expressible");
        }
        if (p != 0.0)
          out << "O: " << d.actions[a] << " : " << d.states[t] << " : " << d.observations[o] << ' ' << num(p) << '\n';
      }
    }
  out << '\n';

  for (std::size_t a = 0; a < model.num_actions(); ++a)
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t t = 0; t < n; ++t)
        for (std::size_t o = 0; o < model.num_observations(); ++o) {
          std::optional<std::size_t> which;
          for (std::size_t r = 0; r < nr; ++r) {
            if (model.signal_probability(s, a, t, o * nr + r) <= 0.0) continue;
            if (which) throw ValidationError("reward is not a deterministic function of (s, a, s', o)");
            which = r;
          }
          if (!which) continue;
          const double raw = model.raw_reward(d.reward_values[*which]);
          if (raw != 0.0)
            out << "R: " << d.actions[a] << " : " << d.states[s] << " : " << d.states[t] << " : "
                << d.observations[o] << ' ' << num(raw) << '\n';
        }
  return out.str();
}

}  // namespace mapomdp
