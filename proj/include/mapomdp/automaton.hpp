#pragma once

// Multiplicity automata over the reals and their construction from a POMDP.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mapomdp/errors.hpp"
#include "mapomdp/linalg.hpp"
#include "mapomdp/pomdp.hpp"

namespace mapomdp {

/// f(w) = initial^T * mu_{w1} * ... * mu_{wk} * terminal.
class MultiplicityAutomaton {
 public:
  MultiplicityAutomaton(std::vector<std::string> alphabet, std::vector<Eigen::MatrixXd> mu, Eigen::VectorXd terminal,
                        Eigen::VectorXd initial)
      : alphabet_(std::move(alphabet)), mu_(std::move(mu)), terminal_(std::move(terminal)), initial_(std::move(initial)) {
    const auto r = initial_.size();
    if (mu_.size() != alphabet_.size()) throw ValidationError("one matrix per alphabet symbol required");
    if (terminal_.size() != r) throw ValidationError("terminal vector length differs from automaton size");
    for (const auto& m : mu_)
      if (m.rows() != r || m.cols() != r) throw ValidationError("symbol matrices must be r x r");
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(initial_.size()); }
  std::size_t alphabet_size() const noexcept { return alphabet_.size(); }
  const std::vector<std::string>& alphabet() const noexcept { return alphabet_; }
  const Eigen::MatrixXd& mu(std::size_t symbol) const { return mu_.at(symbol); }
  const Eigen::VectorXd& terminal() const noexcept { return terminal_; }
  const Eigen::VectorXd& initial() const noexcept { return initial_; }

  std::size_t symbol(const std::string& name) const {
    for (std::size_t i = 0; i < alphabet_.size(); ++i)
      if (alphabet_[i] == name) return i;
    throw std::out_of_range("unknown symbol '" + name + "'");
  }

  /// Weights for row vector `b` after reading `word` (left-to-right vector-matrix products).
  Eigen::RowVectorXd forward(const Eigen::VectorXd& b, std::span<const std::size_t> word) const {
    if (b.size() != initial_.size()) throw ValidationError("weight vector has wrong length");
    Eigen::RowVectorXd row = b.transpose();
    for (std::size_t sym : word) {
      if (sym >= mu_.size()) throw std::out_of_range("unknown symbol index " + std::to_string(sym));
      row = row * mu_[sym];
    }
    return row;
  }

  double evaluate(std::span<const std::size_t> word) const { return weigh(initial_, word); }

  /// Evaluates a word written as one character per symbol (single-character alphabets).
  double evaluate(const std::string& word) const {
    std::vector<std::size_t> symbols;
    for (char c : word) symbols.push_back(symbol(std::string(1, c)));
    return evaluate(symbols);
  }

  /// b^T * mu(word) * terminal for an arbitrary start weight vector.
  double weigh(const Eigen::VectorXd& b, std::span<const std::size_t> word) const {
    return forward(b, word).dot(terminal_);
  }

  /// mu(word) * terminal: the word's value from every start row at once (right-to-left).
  Eigen::VectorXd column(std::span<const std::size_t> word) const {
    Eigen::VectorXd col = terminal_;
    for (auto it = word.rbegin(); it != word.rend(); ++it) {
      if (*it >= mu_.size()) throw std::out_of_range("unknown symbol index " + std::to_string(*it));
      col = mu_[*it] * col;
    }
    return col;
  }

  /// Materializes mu(word). Evaluation never needs this; it exists for audits.
  Eigen::MatrixXd word_matrix(std::span<const std::size_t> word) const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(initial_.size(), initial_.size());
    for (std::size_t sym : word) m = m * mu_.at(sym);
    return m;
  }

 private:
  std::vector<std::string> alphabet_;
  std::vector<Eigen::MatrixXd> mu_;
  Eigen::VectorXd terminal_;
  Eigen::VectorXd initial_;
};

/// Symbol names are "action/observation/rewardIndex"; ordering is lexicographic
/// by (action, observation, reward) index, matching Pomdp::symbol_index.
inline MultiplicityAutomaton from_pomdp(const Pomdp& model) {
  std::vector<std::string> alphabet;
  std::vector<Eigen::MatrixXd> mu;
  alphabet.reserve(model.num_symbols());
  mu.reserve(model.num_symbols());
  for (std::size_t sym = 0; sym < model.num_symbols(); ++sym) {
    const Step step = model.step_at(sym);
    alphabet.push_back(model.data().actions[step.action] + '/' + model.data().observations[step.signal.observation] +
                       '/' + std::to_string(step.signal.reward));
    mu.push_back(model.joint(sym));
  }
  const auto n = static_cast<Eigen::Index>(model.num_states());
  return MultiplicityAutomaton(std::move(alphabet), std::move(mu), Eigen::VectorXd::Ones(n), model.initial_belief());
}

/// The deterministic "contains ab" automaton over {a,b,c,d}, accepting in state 3.
inline MultiplicityAutomaton contains_ab_automaton() {
  Eigen::MatrixXd a(3, 3), b(3, 3), c(3, 3);
  a << 0, 1, 0, 0, 1, 0, 0, 0, 1;
  b << 1, 0, 0, 0, 0, 1, 0, 0, 1;
  c << 1, 0, 0, 1, 0, 0, 0, 0, 1;
  return MultiplicityAutomaton({"a", "b", "c", "d"}, {a, b, c, c}, Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(1, 0, 0));
}

inline double test_probability(const MultiplicityAutomaton& ma, const Eigen::VectorXd& b,
                               std::span<const std::size_t> word) {
  return ma.weigh(b, word);
}

inline double test_probability(const MultiplicityAutomaton& ma, const Pomdp& model, const Eigen::VectorXd& b,
                               const Test& t) {
  return ma.weigh(b, test_symbols(model, t));
}

struct HankelSubmatrix {
  std::vector<Belief> row_labels;
  std::vector<Test> col_labels;
  Eigen::MatrixXd values;  // values(i, j) = P(col j | row i)
};

/// Hankel block filled by the forward filter (independent of the automaton route).
inline HankelSubmatrix hankel_submatrix(const Pomdp& model, const std::vector<Belief>& rows,
                                        const std::vector<Test>& cols) {
  HankelSubmatrix h{rows, cols, Eigen::MatrixXd(rows.size(), cols.size())};
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      h.values(i, j) = sequence_probability(model, rows[i], cols[j]);
  return h;
}

inline std::vector<Belief> state_corners(const Pomdp& model) {
  std::vector<Belief> out;
  for (std::size_t s = 0; s < model.num_states(); ++s) out.push_back(point_mass(model.num_states(), s));
  return out;
}

/// Rank of the all-states Hankel block over tests of length <= max_length.
inline std::size_t hankel_rank(const Pomdp& model, std::size_t max_length, double rank_tol = kRankTolerance) {
  return numerical_rank(hankel_submatrix(model, state_corners(model), enumerate_tests(model, max_length)).values,
                        rank_tol);
}

inline nlohmann::ordered_json to_json(const MultiplicityAutomaton& ma) {
  auto matrix = [](const Eigen::MatrixXd& m) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::ordered_json j;
  j["size"] = ma.size();
  j["alphabet"] = ma.alphabet();
  nlohmann::ordered_json mu = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < ma.alphabet_size(); ++s) mu.push_back(matrix(ma.mu(s)));
  j["mu"] = std::move(mu);
  j["terminal"] = vec(ma.terminal());
  j["initial"] = vec(ma.initial());
  return j;
}

}  // namespace mapomdp
