#pragma once

#include "qode/linear_fa.hpp"
#include "qode/mdp.hpp"

#include <string>
#include <vector>

namespace qode {

struct ModeReport {
  DeterministicPolicy policy;  // empty when modes are not policy-indexed
  Vector margins;              // row quantity [A]_ii + sum_{j != i} |[A]_ij|
  Vector diagonal_terms;       // the [A]_ii part of each margin
  Vector off_diagonal_sums;    // the sum_{j != i} |[A]_ij| part
};

/// Outcome of an algebraic stability certificate: the verdict holds exactly
/// when the worst (largest) margin over all modes is strictly negative.
struct StabilityReport {
  std::string transform;  // description of the L similarity used
  std::vector<ModeReport> per_mode;
  double worst_margin = 0.0;
  bool holds = false;
};

/// Entry i = A_ii + sum_{j != i} |A_ij|. Strictly negative entries across all
/// modes certify global asymptotic stability under arbitrary switching.
Vector row_dominating_margins(const Matrix& A);

/// Margins of L A_sigma L^{-1} for every matrix in the family. L must be
/// square invertible; throws std::invalid_argument otherwise. `labels`
/// optionally tags each mode with its policy.
StabilityReport check_family(const Matrix& L, const std::vector<Matrix>& As,
                             const std::vector<DeterministicPolicy>& labels = {},
                             const std::string& transform_description = "custom");

/// Margins of the tabular mode family with L = I; each margin equals
/// d_i (gamma - 1), so the verdict holds for every valid MDP.
StabilityReport check_qlearning(const Mdp& mdp, long policy_cap = 1'000'000);

/// Margins of the 2n averaging family under L = blkdiag(I, sqrt(gamma) I):
/// d_i (sqrt(gamma) - 1) on the first block and delta (sqrt(gamma) - 1) on
/// the second.
StabilityReport check_averaging(const Mdp& mdp, double delta, long policy_cap = 1'000'000);

/// The sufficient condition for the feature-approximated algorithm: for each
/// policy, margin i = -phi_i^T D phi_i + gamma phi_i^T D P Pi_pi sum_j phi_j,
/// all of which must be negative. Requires nonnegative features with
/// orthogonal columns (throws std::invalid_argument otherwise).
StabilityReport check_lfa_new_condition(const Mdp& mdp, const FeatureMatrix& phi,
                                        const std::vector<DeterministicPolicy>& policy_set);

/// Overload checking over all |A|^|S| policies (the tractable variant).
StabilityReport check_lfa_new_condition(const Mdp& mdp, const FeatureMatrix& phi);

/// The earlier spectral condition: gamma^2 Phi^T Pi^T Dbeta Pi Phi < Phi^T D Phi
/// (as quadratic forms) for each policy, decided by the minimum eigenvalue of
/// the symmetric difference. Each mode's margin is the largest eigenvalue of
/// gamma^2 Phi^T Pi^T Dbeta Pi Phi - Phi^T D Phi, so the report convention
/// (holds iff worst margin < 0) carries over. `state_distribution` is the
/// stationary state distribution of the behavior policy, length |S|.
StabilityReport check_melo_condition(const Vector& state_distribution, const Mdp& mdp,
                                     const FeatureMatrix& phi,
                                     const std::vector<DeterministicPolicy>& policy_set);

/// True iff the entries of phi are all 0 or 1, the columns are orthogonal and
/// the column sum vector is at most all-ones; under these conditions
/// check_lfa_new_condition holds for every MDP.
bool check_binary_feature_guarantee(const Matrix& phi);

}  // namespace qode
