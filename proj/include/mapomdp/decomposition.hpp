#pragma once

// Minimal state/test basis of the Hankel matrix and its improvement into a
// 2-barycentric spanner over the state signatures.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mapomdp/automaton.hpp"
#include "mapomdp/errors.hpp"
#include "mapomdp/linalg.hpp"
#include "mapomdp/pomdp.hpp"

namespace mapomdp {

struct DecompositionConfig {
  double dependence_tol = 1e-7;  // absolute mismatch that counts as a new direction
  double rank_tol = kRankTolerance;
  double swap_margin = 1e-12;    // extra log-determinant gain a spanner swap must show
  std::size_t max_swaps = 100000;
};

struct CoefficientSolve {
  Eigen::VectorXd alpha;
  double residual = 0.0;  // || M^T alpha - target ||_inf
};

/// Basis states B, core tests T and M(i, j) = P(t_j | b_i), plus the test
/// signatures of every hidden state (rows of F_S^T).
class CoreDecomposition {
 public:
  CoreDecomposition(std::vector<std::size_t> basis_states, std::vector<Test> core_tests,
                    Eigen::MatrixXd state_signatures, double rank_tol = kRankTolerance)
      : basis_(std::move(basis_states)), tests_(std::move(core_tests)), signatures_(std::move(state_signatures)) {
    const std::size_t r = basis_.size();
    if (tests_.size() != r || static_cast<std::size_t>(signatures_.cols()) != r)
      throw ValidationError("basis and test sets must have equal size");
    matrix_.resize(r, r);
    for (std::size_t i = 0; i < r; ++i) matrix_.row(i) = signatures_.row(basis_[i]);
    inverse_condition_ = inverse_condition(matrix_);
    if (!(inverse_condition_ > rank_tol))
      throw DegenerateBasisError("basis matrix is numerically singular (inverse condition " +
                                 std::to_string(inverse_condition_) + ")");
    solver_.compute(matrix_.transpose());
  }

  std::size_t rank() const noexcept { return basis_.size(); }
  const std::vector<std::size_t>& basis_states() const noexcept { return basis_; }
  const std::vector<Test>& core_tests() const noexcept { return tests_; }
  const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }
  const Eigen::MatrixXd& state_signatures() const noexcept { return signatures_; }
  double inverse_condition_number() const noexcept { return inverse_condition_; }

  /// F_b^T for a belief: the core-test probabilities are linear in b.
  Eigen::VectorXd signature(const Belief& b) const { return signatures_.transpose() * b; }

  CoefficientSolve solve(const Eigen::VectorXd& target) const {
    if (target.size() != static_cast<Eigen::Index>(rank())) throw ValidationError("target has wrong length");
    CoefficientSolve out;
    out.alpha = solver_.solve(target);
    out.residual = (matrix_.transpose() * out.alpha - target).lpNorm<Eigen::Infinity>();
    return out;
  }

 private:
  std::vector<std::size_t> basis_;
  std::vector<Test> tests_;
  Eigen::MatrixXd signatures_;
  Eigen::MatrixXd matrix_;
  double inverse_condition_ = 0.0;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> solver_;
};

/// The unique alpha with M^T alpha = target.
inline CoefficientSolve solve_coefficients(const CoreDecomposition& decomp, const Eigen::VectorXd& target) {
  return decomp.solve(target);
}

/// Grows B and T from ({s_1}, {lambda}). A state b outside B whose signature
/// is the combination alpha of the basis rows is added, together with the
/// one-step extension sigma∘y, as soon as P(sigma∘y | b) differs from
/// sum_i alpha_i P(sigma∘y | b_i) by more than the dependence tolerance.
/// Candidates are scanned by (state, action, signal, test) index.
inline CoreDecomposition discover_basis(const Pomdp& model, const DecompositionConfig& cfg = {}) {
  const MultiplicityAutomaton ma = from_pomdp(model);
  const std::size_t n = model.num_states();
  std::vector<std::size_t> basis{0};
  std::vector<Test> tests{Test{}};
  Eigen::MatrixXd sig = Eigen::MatrixXd::Ones(n, 1);

  for (std::size_t iteration = 0; iteration < n; ++iteration) {
    const std::size_t r = basis.size();
    Eigen::MatrixXd m(r, r);
    for (std::size_t i = 0; i < r; ++i) m.row(i) = sig.row(basis[i]);
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m.transpose());

    std::vector<Eigen::MatrixXd> extended(model.num_symbols());
    for (std::size_t sym = 0; sym < model.num_symbols(); ++sym) extended[sym] = ma.mu(sym) * sig;

    bool grown = false;
    for (std::size_t b = 0; b < n && !grown; ++b) {
      if (std::find(basis.begin(), basis.end(), b) != basis.end()) continue;
      const Eigen::VectorXd alpha = qr.solve(sig.row(b).transpose());
      for (std::size_t sym = 0; sym < model.num_symbols() && !grown; ++sym) {
        const Eigen::MatrixXd& ext = extended[sym];
        for (std::size_t y = 0; y < r; ++y) {
          double predicted = 0.0;
          for (std::size_t i = 0; i < r; ++i) predicted += alpha(i) * ext(basis[i], y);
          if (std::abs(ext(b, y) - predicted) <= cfg.dependence_tol) continue;
          Test t{model.step_at(sym)};
          t.insert(t.end(), tests[y].begin(), tests[y].end());
          basis.push_back(b);
          tests.push_back(std::move(t));
          sig.conservativeResize(Eigen::NoChange, r + 1);
          sig.col(r) = ext.col(y);
          grown = true;
          break;
        }
      }
    }
    if (!grown) break;
  }
  return CoreDecomposition(std::move(basis), std::move(tests), std::move(sig), cfg.rank_tol);
}

struct SpannerSwap {
  std::size_t position = 0;
  std::size_t removed = 0;
  std::size_t added = 0;
};

/// A decomposition whose basis spans every state signature with coefficients in [-bound, bound].
struct SpannerBasis {
  CoreDecomposition decomposition;
  double bound = 2.0;
  std::vector<double> log_det_ledger;  // log|det M| before the first swap and after each swap
  std::vector<SpannerSwap> swaps;

  double abs_det() const { return std::exp(log_det_ledger.back()); }
  double initial_abs_det() const { return std::exp(log_det_ledger.front()); }
};

/// Replaces basis rows by outside states while a single replacement more
/// than doubles |det M(B, T)|. Determinants are compared as log-magnitudes.
inline SpannerBasis improve_to_spanner(const CoreDecomposition& decomp, const DecompositionConfig& cfg = {}) {
  const Eigen::MatrixXd& sig = decomp.state_signatures();
  const std::size_t n = static_cast<std::size_t>(sig.rows());
  const std::size_t r = decomp.rank();
  std::vector<std::size_t> basis = decomp.basis_states();
  Eigen::MatrixXd m = decomp.matrix();
  std::vector<double> ledger{log_abs_det(m)};
  std::vector<SpannerSwap> swaps;
  const double threshold = std::numbers::ln2 + cfg.swap_margin;

  for (;;) {
    bool swapped = false;
    for (std::size_t x = 0; x < n && !swapped; ++x) {
      if (std::find(basis.begin(), basis.end(), x) != basis.end()) continue;
      for (std::size_t i = 0; i < r; ++i) {
        Eigen::MatrixXd candidate = m;
        candidate.row(i) = sig.row(x);
        const double ld = log_abs_det(candidate);
        if (ld > ledger.back() + threshold) {
          swaps.push_back({i, basis[i], x});
          basis[i] = x;
          m = std::move(candidate);
          ledger.push_back(ld);
          swapped = true;
          break;
        }
      }
    }
    if (!swapped) break;
    if (swaps.size() > cfg.max_swaps) throw std::logic_error("spanner improvement did not terminate");
  }
  return SpannerBasis{CoreDecomposition(std::move(basis), decomp.core_tests(), sig, cfg.rank_tol), 2.0,
                      std::move(ledger), std::move(swaps)};
}

inline SpannerBasis improve_to_spanner(const Pomdp&, const CoreDecomposition& decomp,
                                       const DecompositionConfig& cfg = {}) {
  return improve_to_spanner(decomp, cfg);
}

/// max_s max_i |alpha_i(s)| over all hidden states.
inline double max_state_coefficient(const CoreDecomposition& decomp) {
  double worst = 0.0;
  const auto& sig = decomp.state_signatures();
  for (Eigen::Index s = 0; s < sig.rows(); ++s)
    worst = std::max(worst, decomp.solve(sig.row(s).transpose()).alpha.lpNorm<Eigen::Infinity>());
  return worst;
}

inline nlohmann::ordered_json tests_to_json(const std::vector<Test>& tests) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const Test& t : tests) {
    nlohmann::ordered_json steps = nlohmann::ordered_json::array();
    for (const Step& s : t) steps.push_back({s.action, s.signal.observation, s.signal.reward});
    out.push_back(std::move(steps));
  }
  return out;
}

inline nlohmann::ordered_json to_json(const CoreDecomposition& decomp) {
  nlohmann::ordered_json j;
  j["rank"] = decomp.rank();
  j["basisStates"] = decomp.basis_states();
  j["coreTests"] = tests_to_json(decomp.core_tests());
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < decomp.matrix().rows(); ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index k = 0; k < decomp.matrix().cols(); ++k) row.push_back(decomp.matrix()(i, k));
    rows.push_back(std::move(row));
  }
  j["matrix"] = std::move(rows);
  return j;
}

inline nlohmann::ordered_json to_json(const SpannerBasis& spanner) {
  nlohmann::ordered_json j = to_json(spanner.decomposition);
  j["spannerBound"] = spanner.bound;
  j["logAbsDetLedger"] = spanner.log_det_ledger;
  nlohmann::ordered_json swaps = nlohmann::ordered_json::array();
  for (const auto& s : spanner.swaps)
    swaps.push_back({{"position", s.position}, {"removed", s.removed}, {"added", s.added}});
  j["swaps"] = std::move(swaps);
  return j;
}

}  // namespace mapomdp
