#include "qode/mdp.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace qode {

namespace {

constexpr double kSumTol = 1e-12;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::vector<std::string> validate(const Mdp& mdp) {
  std::vector<std::string> bad;
  if (mdp.num_states < 1) bad.push_back("num_states must be positive");
  if (mdp.num_actions < 1) bad.push_back("num_actions must be positive");
  if (!(mdp.gamma >= 0.0 && mdp.gamma < 1.0))
    bad.push_back("gamma " + fmt(mdp.gamma) + " outside [0, 1)");
  if (!bad.empty()) return bad;

  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  if ((int)mdp.transitions.size() != A)
    bad.push_back("expected " + std::to_string(A) + " transition matrices, got " +
                  std::to_string(mdp.transitions.size()));
  if ((int)mdp.rewards.size() != A)
    bad.push_back("expected " + std::to_string(A) + " reward vectors, got " +
                  std::to_string(mdp.rewards.size()));
  for (int a = 0; a < (int)mdp.transitions.size(); ++a) {
    const Matrix& P = mdp.transitions[a];
    if (P.rows() != S || P.cols() != S) {
      bad.push_back("transitions[" + std::to_string(a) + "] is " + std::to_string(P.rows()) +
                    "x" + std::to_string(P.cols()) + ", expected " + std::to_string(S) + "x" +
                    std::to_string(S));
      continue;
    }
    for (int s = 0; s < S; ++s) {
      double sum = 0.0;
      for (int t = 0; t < S; ++t) {
        if (P(s, t) < 0.0)
          bad.push_back("transitions[" + std::to_string(a) + "](" + std::to_string(s) + "," +
                        std::to_string(t) + ") = " + fmt(P(s, t)) + " is negative");
        sum += P(s, t);
      }
      if (std::abs(sum - 1.0) > kSumTol)
        bad.push_back("transitions[" + std::to_string(a) + "] row " + std::to_string(s) +
                      " sums to " + fmt(sum));
    }
  }
  for (int a = 0; a < (int)mdp.rewards.size(); ++a) {
    if (mdp.rewards[a].size() != S)
      bad.push_back("rewards[" + std::to_string(a) + "] has length " +
                    std::to_string(mdp.rewards[a].size()) + ", expected " + std::to_string(S));
  }
  if (mdp.dist.size() != mdp.pair_count()) {
    bad.push_back("dist has length " + std::to_string(mdp.dist.size()) + ", expected " +
                  std::to_string(mdp.pair_count()));
  } else {
    double sum = 0.0;
    for (int i = 0; i < mdp.dist.size(); ++i) {
      if (!(mdp.dist(i) > 0.0))
        bad.push_back("dist(" + std::to_string(i) + ") = " + fmt(mdp.dist(i)) +
                      " is not strictly positive");
      sum += mdp.dist(i);
    }
    if (std::abs(sum - 1.0) > kSumTol) bad.push_back("dist sums to " + fmt(sum));
  }
  return bad;
}

void require_valid(const Mdp& mdp) {
  auto bad = validate(mdp);
  if (bad.empty()) return;
  std::string msg = "invalid MDP:";
  for (const auto& b : bad) msg += "\n  " + b;
  throw std::invalid_argument(msg);
}

Matrix stacked_transition(const Mdp& mdp) {
  const int S = mdp.num_states;
  Matrix P(mdp.pair_count(), S);
  for (int a = 0; a < mdp.num_actions; ++a) P.middleRows(a * S, S) = mdp.transitions[a];
  return P;
}

Vector stacked_rewards(const Mdp& mdp) {
  const int S = mdp.num_states;
  Vector R(mdp.pair_count());
  for (int a = 0; a < mdp.num_actions; ++a) R.segment(a * S, S) = mdp.rewards[a];
  return R;
}

Matrix diag_distribution(const Mdp& mdp) {
  return Matrix(mdp.dist.asDiagonal());
}

Matrix policy_matrix(const DeterministicPolicy& pi, int num_states, int num_actions) {
  Matrix M = Matrix::Zero(num_states, num_states * num_actions);
  for (int s = 0; s < num_states; ++s) {
    const int a = pi.actions.at(s);
    if (a < 0 || a >= num_actions)
      throw std::invalid_argument("policy action " + std::to_string(a) + " out of range");
    M(s, a * num_states + s) = 1.0;
  }
  return M;
}

DeterministicPolicy greedy_policy(const Vector& q, int num_states, int num_actions) {
  DeterministicPolicy pi;
  pi.actions.resize(num_states);
  for (int s = 0; s < num_states; ++s) {
    int best = 0;
    double best_value = q(s);
    for (int a = 1; a < num_actions; ++a) {
      const double v = q(a * num_states + s);
      if (v > best_value) {
        best_value = v;
        best = a;
      }
    }
    pi.actions[s] = best;
  }
  return pi;
}

Vector state_maxima(const Vector& q, int num_states, int num_actions) {
  Vector m(num_states);
  for (int s = 0; s < num_states; ++s) {
    double best = q(s);
    for (int a = 1; a < num_actions; ++a) best = std::max(best, q(a * num_states + s));
    m(s) = best;
  }
  return m;
}

long policy_index(const DeterministicPolicy& pi, int num_actions) {
  long idx = 0;
  for (int a : pi.actions) idx = idx * num_actions + a;
  return idx;
}

DeterministicPolicy policy_from_index(long index, int num_states, int num_actions) {
  DeterministicPolicy pi;
  pi.actions.assign(num_states, 0);
  for (int s = num_states - 1; s >= 0; --s) {
    pi.actions[s] = (int)(index % num_actions);
    index /= num_actions;
  }
  return pi;
}

std::vector<DeterministicPolicy> enumerate_policies(int num_states, int num_actions, long cap) {
  double count = std::pow((double)num_actions, (double)num_states);
  if (count > (double)cap)
    throw std::invalid_argument("policy count " + fmt(count) + " exceeds cap " +
                                std::to_string(cap));
  const long n = (long)std::llround(count);
  std::vector<DeterministicPolicy> all;
  all.reserve(n);
  for (long i = 0; i < n; ++i) all.push_back(policy_from_index(i, num_states, num_actions));
  return all;
}

Vector bellman_operator(const Mdp& mdp, const Vector& q) {
  const Vector m = state_maxima(q, mdp.num_states, mdp.num_actions);
  Vector out(mdp.pair_count());
  for (int a = 0; a < mdp.num_actions; ++a)
    out.segment(a * mdp.num_states, mdp.num_states) =
        mdp.rewards[a] + mdp.gamma * (mdp.transitions[a] * m);
  return out;
}

Vector solve_q_star(const Mdp& mdp, double tol, long max_iterations) {
  Vector q = Vector::Zero(mdp.pair_count());
  for (long k = 0; k < max_iterations; ++k) {
    Vector next = bellman_operator(mdp, q);
    const double residual = (next - q).lpNorm<Eigen::Infinity>();
    q = std::move(next);
    if (residual <= tol) return q;
  }
  throw std::runtime_error("value iteration did not reach tol " + fmt(tol) + " within " +
                           std::to_string(max_iterations) + " iterations");
}

Vector stationary_state_action_distribution(const std::vector<Matrix>& transitions,
                                            const BehaviorPolicy& beta, double tol,
                                            long max_iterations) {
  const int A = (int)transitions.size();
  if (A < 1) throw std::invalid_argument("no transition matrices");
  const int S = (int)transitions[0].rows();
  if (beta.probs.rows() != S || beta.probs.cols() != A)
    throw std::invalid_argument("behavior policy shape mismatch");

  Matrix chain = Matrix::Zero(S, S);
  for (int a = 0; a < A; ++a)
    chain += beta.probs.col(a).asDiagonal() * transitions[a];

  // The ramp start breaks the symmetry of periodic chains so they fail to
  // converge instead of silently returning the uniform fixed point.
  Vector mu(S);
  for (int s = 0; s < S; ++s) mu(s) = (double)(s + 1);
  mu /= mu.sum();

  bool converged = false;
  for (long k = 0; k < max_iterations; ++k) {
    Vector next = chain.transpose() * mu;
    next /= next.sum();
    const double change = (next - mu).lpNorm<Eigen::Infinity>();
    mu = std::move(next);
    if (change <= tol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw std::runtime_error("power iteration did not converge; chain may be non-ergodic");

  Vector d(S * A);
  for (int a = 0; a < A; ++a)
    for (int s = 0; s < S; ++s) d(a * S + s) = mu(s) * beta.probs(s, a);
  return d;
}

}  // namespace qode
