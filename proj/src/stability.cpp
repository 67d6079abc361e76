#include "qode/stability.hpp"

#include "qode/switching.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace qode {

namespace {

void margins_with_parts(const Matrix& A, Vector& margins, Vector& diag, Vector& off) {
  const Eigen::Index n = A.rows();
  margins.resize(n);
  diag.resize(n);
  off.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) sum += std::abs(A(i, j));
    diag(i) = A(i, i);
    off(i) = sum;
    margins(i) = A(i, i) + sum;
  }
}

StabilityReport finalize(StabilityReport report) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& mode : report.per_mode)
    if (mode.margins.size() > 0) worst = std::max(worst, mode.margins.maxCoeff());
  report.worst_margin = worst;
  report.holds = worst < 0.0;
  return report;
}

}  // namespace

Vector row_dominating_margins(const Matrix& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("margins require a square matrix");
  Vector margins, diag, off;
  margins_with_parts(A, margins, diag, off);
  return margins;
}

StabilityReport check_family(const Matrix& L, const std::vector<Matrix>& As,
                             const std::vector<DeterministicPolicy>& labels,
                             const std::string& transform_description) {
  if (L.rows() != L.cols()) throw std::invalid_argument("L must be square");
  Eigen::FullPivLU<Matrix> lu(L);
  if (!lu.isInvertible()) throw std::invalid_argument("L is singular");
  const Matrix Linv = lu.inverse();

  StabilityReport report;
  report.transform = transform_description;
  for (std::size_t m = 0; m < As.size(); ++m) {
    if (As[m].rows() != L.rows() || As[m].cols() != L.cols())
      throw std::invalid_argument("mode matrix dimension mismatch with L");
    const Matrix transformed = L * As[m] * Linv;
    ModeReport mode;
    if (m < labels.size()) mode.policy = labels[m];
    margins_with_parts(transformed, mode.margins, mode.diagonal_terms, mode.off_diagonal_sums);
    report.per_mode.push_back(std::move(mode));
  }
  return finalize(std::move(report));
}

StabilityReport check_qlearning(const Mdp& mdp, long policy_cap) {
  const auto policies = enumerate_policies(mdp.num_states, mdp.num_actions, policy_cap);
  const auto As = tabular_mode_matrices(mdp);
  const Matrix I = Matrix::Identity(mdp.pair_count(), mdp.pair_count());
  return check_family(I, As, policies, "identity");
}

StabilityReport check_averaging(const Mdp& mdp, double delta, long policy_cap) {
  const auto policies = enumerate_policies(mdp.num_states, mdp.num_actions, policy_cap);
  const auto As = averaging_mode_matrices(mdp, delta);
  const int n = mdp.pair_count();
  Matrix L = Matrix::Identity(2 * n, 2 * n);
  L.bottomRightCorner(n, n) *= std::sqrt(mdp.gamma);
  return check_family(L, As, policies, "blkdiag(I, sqrt(gamma) I)");
}

StabilityReport check_lfa_new_condition(const Mdp& mdp, const FeatureMatrix& phi,
                                        const std::vector<DeterministicPolicy>& policy_set) {
  if (!phi.nonnegative)
    throw std::invalid_argument("the condition requires nonnegative feature entries");
  if (!phi.orthogonal_columns)
    throw std::invalid_argument("the condition requires orthogonal feature columns");
  require_valid(mdp);
  if (phi.values.rows() != mdp.pair_count())
    throw std::invalid_argument("feature row count does not match |S||A|");

  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const Matrix& F = phi.values;
  const Matrix FtDP = F.transpose() * mdp.dist.asDiagonal() * stacked_transition(mdp);
  const Matrix FtDF = F.transpose() * mdp.dist.asDiagonal() * F;

  StabilityReport report;
  report.transform = "identity";
  for (const auto& pi : policy_set) {
    const Matrix Am = mdp.gamma * FtDP * policy_matrix(pi, S, A) * F - FtDF;
    ModeReport mode;
    mode.policy = pi;
    // Under nonnegativity and orthogonality the off-diagonal entries are
    // nonnegative and Phi^T D Phi is diagonal, so these row quantities equal
    // -phi_i^T D phi_i + gamma phi_i^T D P Pi sum_j phi_j.
    margins_with_parts(Am, mode.margins, mode.diagonal_terms, mode.off_diagonal_sums);
    report.per_mode.push_back(std::move(mode));
  }
  return finalize(std::move(report));
}

StabilityReport check_lfa_new_condition(const Mdp& mdp, const FeatureMatrix& phi) {
  return check_lfa_new_condition(mdp, phi,
                                 enumerate_policies(mdp.num_states, mdp.num_actions));
}

StabilityReport check_melo_condition(const Vector& state_distribution, const Mdp& mdp,
                                     const FeatureMatrix& phi,
                                     const std::vector<DeterministicPolicy>& policy_set) {
  require_valid(mdp);
  if (state_distribution.size() != mdp.num_states)
    throw std::invalid_argument("state distribution length mismatch");
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const Matrix& F = phi.values;
  const Matrix FtDF = F.transpose() * mdp.dist.asDiagonal() * F;

  StabilityReport report;
  report.transform = "min-eigenvalue of Phi^T D Phi - gamma^2 Phi^T Pi^T Dbeta Pi Phi";
  for (const auto& pi : policy_set) {
    const Matrix PiF = policy_matrix(pi, S, A) * F;  // |S| x n
    const Matrix difference =
        mdp.gamma * mdp.gamma * PiF.transpose() * state_distribution.asDiagonal() * PiF - FtDF;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(difference);
    double margin = eig.eigenvalues().maxCoeff();
    if (std::abs(margin) <= 1e-10) margin = 0.0;  // strictness tolerance
    ModeReport mode;
    mode.policy = pi;
    mode.margins = Vector::Constant(1, margin);
    report.per_mode.push_back(std::move(mode));
  }
  return finalize(std::move(report));
}

bool check_binary_feature_guarantee(const Matrix& phi) {
  for (Eigen::Index i = 0; i < phi.rows(); ++i)
    for (Eigen::Index j = 0; j < phi.cols(); ++j)
      if (phi(i, j) != 0.0 && phi(i, j) != 1.0) return false;
  for (Eigen::Index a = 0; a < phi.cols(); ++a)
    for (Eigen::Index b = a + 1; b < phi.cols(); ++b)
      if (phi.col(a).dot(phi.col(b)) != 0.0) return false;
  const Vector column_sum = phi.rowwise().sum();
  return (column_sum.array() <= 1.0).all();
}

}  // namespace qode
