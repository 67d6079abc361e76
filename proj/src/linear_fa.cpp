#include "qode/linear_fa.hpp"

#include "qode/rng.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <set>
#include <stdexcept>

namespace qode {

FeatureMatrix FeatureMatrix::create(Matrix values) {
  if (values.rows() < 1 || values.cols() < 1)
    throw std::invalid_argument("feature matrix must be nonempty");
  Eigen::ColPivHouseholderQR<Matrix> qr(values);
  if (qr.rank() < values.cols())
    throw std::invalid_argument("feature matrix is rank deficient: rank " +
                                std::to_string(qr.rank()) + " < " +
                                std::to_string(values.cols()) + " columns");
  FeatureMatrix phi;
  phi.nonnegative = (values.array() >= 0.0).all();
  phi.orthogonal_columns = true;
  for (int i = 0; i < values.cols() && phi.orthogonal_columns; ++i)
    for (int j = i + 1; j < values.cols(); ++j) {
      const double dot = values.col(i).dot(values.col(j));
      if (std::abs(dot) > 1e-12 * values.col(i).norm() * values.col(j).norm()) {
        phi.orthogonal_columns = false;
        break;
      }
    }
  phi.values = std::move(values);
  return phi;
}

Matrix projection(const Mdp& mdp, const FeatureMatrix& phi) {
  const Matrix& F = phi.values;
  if (F.rows() != mdp.pair_count())
    throw std::invalid_argument("feature row count does not match |S||A|");
  const Matrix G = F.transpose() * mdp.dist.asDiagonal() * F;
  Eigen::FullPivLU<Matrix> lu(G);
  if (!lu.isInvertible())
    throw std::runtime_error("Phi^T D Phi is singular; projection undefined");
  return F * lu.inverse() * F.transpose() * mdp.dist.asDiagonal();
}

std::vector<DeterministicPolicy> enumerate_theta_phi(const Mdp& mdp, const FeatureMatrix& phi,
                                                     const ThetaPhiConfig& config) {
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const int n = phi.features();
  std::set<long> seen;

  auto add = [&](const Vector& theta) {
    const Vector q = phi.values * theta;
    seen.insert(policy_index(greedy_policy(q, S, A), A));
  };

  add(Vector::Zero(n));
  if (n == 1) {
    add(Vector::Constant(1, 1.0));
    add(Vector::Constant(1, -1.0));
  } else {
    SplitMix64 rng(config.seed);
    for (long k = 0; k < config.draws; ++k) {
      Vector theta(n);
      for (int i = 0; i < n; ++i) theta(i) = rng.next_gaussian();
      const double norm = theta.norm();
      if (norm == 0.0) continue;
      add(theta / norm);
    }
  }

  std::vector<DeterministicPolicy> out;
  out.reserve(seen.size());
  for (long idx : seen) out.push_back(policy_from_index(idx, S, A));
  return out;
}

ThetaStar solve_theta_star(const Mdp& mdp, const FeatureMatrix& phi, double tol) {
  require_valid(mdp);
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const Matrix& F = phi.values;
  const Matrix P = stacked_transition(mdp);
  const Vector R = stacked_rewards(mdp);
  const auto D = mdp.dist.asDiagonal();
  const Matrix FtD = F.transpose() * D;
  const Matrix FtDF = FtD * F;
  const Vector rhs = FtD * R;
  const Matrix Gamma = projection(mdp, phi);

  std::vector<DeterministicPolicy> candidates = enumerate_theta_phi(mdp, phi);
  std::set<long> tried;
  for (const auto& pi : candidates) tried.insert(policy_index(pi, A));
  double count = std::pow((double)A, (double)S);
  if (count <= 1e6) {
    for (const auto& pi : enumerate_policies(S, A))
      if (!tried.count(policy_index(pi, A))) candidates.push_back(pi);
  }

  long singular = 0;
  for (const auto& pi : candidates) {
    const Matrix M = FtDF - mdp.gamma * FtD * P * policy_matrix(pi, S, A) * F;
    Eigen::FullPivLU<Matrix> lu(M);
    if (!lu.isInvertible()) {
      ++singular;
      continue;
    }
    const Vector theta = lu.solve(rhs);
    const Vector q = F * theta;
    if (!(greedy_policy(q, S, A) == pi)) continue;
    const Vector residual_vec = q - Gamma * (mdp.gamma * P * state_maxima(q, S, A) + R);
    const double residual = residual_vec.lpNorm<Eigen::Infinity>();
    if (residual <= tol) return ThetaStar{theta, pi, residual};
  }
  throw std::runtime_error("no self-consistent projected fixed point found (" +
                           std::to_string(candidates.size()) + " candidate policies, " +
                           std::to_string(singular) + " singular systems)");
}

}  // namespace qode
