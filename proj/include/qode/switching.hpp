#pragma once

#include "qode/linear_fa.hpp"
#include "qode/mdp.hpp"

#include <functional>
#include <utility>
#include <variant>
#include <vector>

namespace qode {

struct FixedMode {
  int mode = 0;
};

/// Mode = index of the greedy policy of a Q-vector reconstructed from a
/// window of the ODE state: q = features * (x[window] + offset), with an
/// empty `features` meaning the identity map. Covers the tabular rule
/// (window = whole state, offset = Q*), the shifted comparison rules
/// (offset = 0), the averaging rule (window = second block) and the
/// feature-approximation rule (features = Phi, offset = theta*).
struct GreedyFeedback {
  int num_states = 0;
  int num_actions = 0;
  Eigen::Index window_start = 0;
  Eigen::Index window_size = 0;
  Vector offset;    // length window_size
  Matrix features;  // pair_count x window_size, or empty for identity
};

struct ModeSchedule {
  std::function<int(double)> mode_at;
};

using SwitchingRule = std::variant<FixedMode, GreedyFeedback, ModeSchedule>;

/// dx/dt = A[mode] x + b[mode] with the mode chosen by the switching rule.
struct SwitchedAffineSystem {
  int dim = 0;
  std::vector<Matrix> A;
  std::vector<Vector> b;
  SwitchingRule rule;

  int modes() const { return (int)A.size(); }
  int mode_at(double t, const Vector& x) const;
  Vector field(double t, const Vector& x) const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<int> modes;  // rule evaluated at each recorded point
};

/// Allocation-free RK4 stepping over one system; the mode is re-evaluated at
/// every stage from the stage state.
class SystemStepper {
 public:
  explicit SystemStepper(const SwitchedAffineSystem& sys);
  int mode(double t, const Vector& x);
  void field(double t, const Vector& x, Vector& out);
  /// Advances x by one RK4 step; t is updated to t + dt.
  void step(double& t, Vector& x, double dt);

 private:
  const SwitchedAffineSystem& sys_;
  Vector w_, q_, k1_, k2_, k3_, k4_, stage_;
};

/// A_pi = gamma D P Pi_pi - D over all policies, in enumeration order.
std::vector<Matrix> tabular_mode_matrices(const Mdp& mdp);

/// Blocks [[-D, gamma D P Pi_pi], [delta I, -delta I]] over all policies.
std::vector<Matrix> averaging_mode_matrices(const Mdp& mdp, double delta);

/// A_pi = Phi^T (gamma D P Pi_pi - D) Phi over all policies.
std::vector<Matrix> lfa_mode_matrices(const Mdp& mdp, const FeatureMatrix& phi);

/// Switched affine model of the tabular algorithm in the shifted coordinates
/// x = Q - Q*: per policy pi, A = gamma D P Pi_pi - D and
/// b = gamma D P (Pi_pi - Pi_{pi*}) Q*, with the mode chosen greedily from
/// x + Q*. Modes are indexed by policy_index.
SwitchedAffineSystem build_q_ode(const Mdp& mdp, const Vector& q_star);

/// Upper comparison: same A family, b = 0, mode greedy in x itself.
/// Lower comparison: the single fixed mode of the optimal policy, b = 0.
std::pair<SwitchedAffineSystem, SwitchedAffineSystem> build_q_comparisons(const Mdp& mdp,
                                                                          const Vector& q_star);

/// 2|S||A|-dimensional model of the two-estimate averaging algorithm:
/// per policy, blocks [[-D, gamma D P Pi_pi], [delta I, -delta I]] with the
/// offset [gamma D P (Pi_pi - Pi_{pi*}) Q*; 0]; the mode is driven by the
/// second state block plus Q*.
SwitchedAffineSystem build_averaging_ode(const Mdp& mdp, double delta, const Vector& q_star);

std::pair<SwitchedAffineSystem, SwitchedAffineSystem> build_averaging_comparisons(
    const Mdp& mdp, double delta, const Vector& q_star);

/// n-dimensional model under linear function approximation in x = theta - theta*:
/// per policy, A = Phi^T (gamma D P Pi_pi - D) Phi and
/// b = gamma Phi^T D P (Pi_pi - Pi_{pi_{Phi theta*}}) Phi theta*, with the mode
/// chosen greedily from Phi (x + theta*).
SwitchedAffineSystem build_lfa_ode(const Mdp& mdp, const FeatureMatrix& phi,
                                   const Vector& theta_star);

/// Requires nonnegative entries and orthogonal columns of Phi; throws
/// std::invalid_argument otherwise.
std::pair<SwitchedAffineSystem, SwitchedAffineSystem> build_lfa_comparisons(
    const Mdp& mdp, const FeatureMatrix& phi, const Vector& theta_star);

/// Classical fixed-step RK4 from x0 over [0, t_final]. Records every
/// `record_stride`-th point (plus the final one) with the mode the rule
/// selects there. Throws std::runtime_error when the state leaves the finite
/// range (blow-up or bad input).
Trajectory integrate(const SwitchedAffineSystem& sys, const Vector& x0, double t_final,
                     double dt, long record_stride = 1);

}  // namespace qode
