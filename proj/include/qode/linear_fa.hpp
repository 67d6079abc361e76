#pragma once

#include "qode/mdp.hpp"

#include <cstdint>
#include <vector>

namespace qode {

/// Feature matrix for linear value approximation: |S||A| x n, rows indexed
/// action-major, one column per feature. Construction verifies full column
/// rank and records whether the entries are nonnegative and the columns
/// mutually orthogonal (the assumptions the comparison-system constructions
/// and the new sufficient condition rely on).
struct FeatureMatrix {
  Matrix values;
  bool nonnegative = false;
  bool orthogonal_columns = false;

  static FeatureMatrix create(Matrix values);

  int features() const { return (int)values.cols(); }
  Vector column(int j) const { return values.col(j); }
};

/// D-weighted projection onto range(Phi): Gamma = Phi (Phi^T D Phi)^{-1} Phi^T D.
/// Throws std::runtime_error when Phi^T D Phi is singular.
Matrix projection(const Mdp& mdp, const FeatureMatrix& phi);

struct ThetaPhiConfig {
  long draws = 10'000;
  std::uint64_t seed = 0;
};

/// Greedy-realizable policies: every policy that is greedy w.r.t. Phi*theta
/// for some sampled theta (unit sphere plus theta = 0). Exact for n = 1 via
/// the sign cases theta > 0, theta = 0, theta < 0; otherwise a sound subset
/// that grows monotonically with the draw count. Sorted by policy index.
std::vector<DeterministicPolicy> enumerate_theta_phi(const Mdp& mdp, const FeatureMatrix& phi,
                                                     const ThetaPhiConfig& config = {});

struct ThetaStar {
  Vector theta;
  DeterministicPolicy policy;  // greedy policy of Phi * theta
  double residual = 0.0;       // max-norm projected Bellman residual
};

/// Solves the projected Bellman equation Phi theta = Gamma(gamma P Pi Phi theta + R)
/// by per-policy linear solves plus a greedy self-consistency check. Candidates
/// are the sampled realizable set first, then every remaining policy (a
/// non-realizable candidate can never pass the consistency check, so the wider
/// sweep only removes sampling misses). Throws std::runtime_error when no
/// self-consistent solution exists within tolerance.
ThetaStar solve_theta_star(const Mdp& mdp, const FeatureMatrix& phi, double tol = 1e-10);

}  // namespace qode
