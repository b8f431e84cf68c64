#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace mapomdp {

/// Relative singular-value cutoff for numerical rank.
inline constexpr double kRankTolerance = 1e-8;

inline Eigen::VectorXd singular_values(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return Eigen::VectorXd();
  return Eigen::BDCSVD<Eigen::MatrixXd>(m).singularValues();
}

/// Number of singular values above rel_tol * (largest singular value).
inline std::size_t numerical_rank(const Eigen::MatrixXd& m, double rel_tol = kRankTolerance) {
  const Eigen::VectorXd sv = singular_values(m);
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > rel_tol * sv(0)) ++rank;
  return rank;
}

/// smallest / largest singular value; 0 for singular or empty input.
inline double inverse_condition(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd sv = singular_values(m);
  if (sv.size() == 0 || sv(0) <= 0.0) return 0.0;
  return sv(sv.size() - 1) / sv(0);
}

/// log|det| from a column-pivoted Householder QR; -inf when singular.
inline double log_abs_det(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
  const auto diag = qr.matrixQR().diagonal();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    const double v = std::abs(diag(i));
    if (v == 0.0) return -std::numeric_limits<double>::infinity();
    sum += std::log(v);
  }
  return sum;
}

}  // namespace mapomdp
