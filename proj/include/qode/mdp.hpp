#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace qode {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Finite MDP: per-action transition matrices, expected rewards, discount,
/// and an i.i.d. state-action sampling distribution.
///
/// All vectors and matrices over state-action pairs use the action-major
/// stacking: pair (s, a), both 0-based, lives at component a * num_states + s.
/// Q-vectors are plain Vector values of length num_states * num_actions in
/// that order.
struct Mdp {
  int num_states = 0;
  int num_actions = 0;
  std::vector<Matrix> transitions;  // one row-stochastic |S| x |S| matrix per action
  std::vector<Vector> rewards;      // expected reward per state, one vector per action
  double gamma = 0.0;               // discount, in [0, 1)
  Vector dist;                      // sampling probabilities over pairs, action-major

  int pair_count() const { return num_states * num_actions; }
  int pair_index(int state, int action) const { return action * num_states + state; }
};

/// One action per state, 0-based.
struct DeterministicPolicy {
  std::vector<int> actions;
  bool operator==(const DeterministicPolicy&) const = default;
};

/// Row s holds the action probabilities used to collect data in state s.
struct BehaviorPolicy {
  Matrix probs;  // |S| x |A|, rows sum to 1
};

/// Returns every broken invariant with its location; empty means valid.
std::vector<std::string> validate(const Mdp& mdp);

/// Throws std::invalid_argument listing all violations when the MDP is invalid.
void require_valid(const Mdp& mdp);

/// Vertical stack [P_1; ...; P_|A|], |S||A| x |S|; row block a equals P_a.
Matrix stacked_transition(const Mdp& mdp);

/// Rewards stacked action-major, length |S||A|.
Vector stacked_rewards(const Mdp& mdp);

/// diag(d), |S||A| x |S||A|.
Matrix diag_distribution(const Mdp& mdp);

/// Selector matrix of a policy, |S| x |S||A|: row s has a single 1 at pair
/// (s, pi(s)).
Matrix policy_matrix(const DeterministicPolicy& pi, int num_states, int num_actions);

/// Per-state argmax of q over actions; ties resolve to the lowest action index.
DeterministicPolicy greedy_policy(const Vector& q, int num_states, int num_actions);

/// Per-state maxima of q over actions, length |S|.
Vector state_maxima(const Vector& q, int num_states, int num_actions);

/// Position of pi in the lexicographic enumeration of all policies (0-based);
/// the action of state 0 is the most significant digit.
long policy_index(const DeterministicPolicy& pi, int num_actions);

DeterministicPolicy policy_from_index(long index, int num_states, int num_actions);

/// All |A|^|S| deterministic policies in lexicographic order. Throws
/// std::invalid_argument when the count exceeds `cap`.
std::vector<DeterministicPolicy> enumerate_policies(int num_states, int num_actions,
                                                    long cap = 1'000'000);

/// T q = R + gamma * P * Pi_{greedy(q)} * q, componentwise action-major.
Vector bellman_operator(const Mdp& mdp, const Vector& q);

/// Fixed point of the Bellman operator to within `tol` in the max norm,
/// by value iteration. Throws std::runtime_error past `max_iterations`.
Vector solve_q_star(const Mdp& mdp, double tol = 1e-12, long max_iterations = 1'000'000);

/// Stationary state-action distribution d(s,a) = mu(s) * beta(a|s) with mu the
/// stationary distribution of the state chain induced by `beta`, found by
/// power iteration. Returned action-major. Throws std::runtime_error when the
/// chain does not converge within `max_iterations` (non-ergodic chain).
Vector stationary_state_action_distribution(const std::vector<Matrix>& transitions,
                                            const BehaviorPolicy& beta,
                                            double tol = 1e-12,
                                            long max_iterations = 1'000'000);

}  // namespace qode
