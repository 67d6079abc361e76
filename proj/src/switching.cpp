#include "qode/switching.hpp"

#include <cmath>
#include <stdexcept>

namespace qode {

namespace {

int greedy_mode_index(const GreedyFeedback& rule, const Vector& q) {
  const int S = rule.num_states;
  const int A = rule.num_actions;
  long idx = 0;
  for (int s = 0; s < S; ++s) {
    int best = 0;
    double best_value = q(s);
    for (int a = 1; a < A; ++a) {
      const double v = q(a * S + s);
      if (v > best_value) {
        best_value = v;
        best = a;
      }
    }
    idx = idx * A + best;
  }
  return (int)idx;
}

void check_mode_range(const SwitchedAffineSystem& sys, int mode) {
  if (mode < 0 || mode >= sys.modes())
    throw std::out_of_range("switching rule selected mode " + std::to_string(mode) + " of " +
                            std::to_string(sys.modes()));
}

}  // namespace

int SwitchedAffineSystem::mode_at(double t, const Vector& x) const {
  int m = 0;
  if (const auto* fixed = std::get_if<FixedMode>(&rule)) {
    m = fixed->mode;
  } else if (const auto* greedy = std::get_if<GreedyFeedback>(&rule)) {
    Vector w = x.segment(greedy->window_start, greedy->window_size) + greedy->offset;
    if (greedy->features.size() > 0)
      m = greedy_mode_index(*greedy, greedy->features * w);
    else
      m = greedy_mode_index(*greedy, w);
  } else {
    m = std::get<ModeSchedule>(rule).mode_at(t);
  }
  check_mode_range(*this, m);
  return m;
}

Vector SwitchedAffineSystem::field(double t, const Vector& x) const {
  const int m = mode_at(t, x);
  return A[m] * x + b[m];
}

SystemStepper::SystemStepper(const SwitchedAffineSystem& sys) : sys_(sys) {
  if (const auto* greedy = std::get_if<GreedyFeedback>(&sys.rule)) {
    w_.resize(greedy->window_size);
    if (greedy->features.size() > 0) q_.resize(greedy->features.rows());
  }
  k1_.resize(sys.dim);
  k2_.resize(sys.dim);
  k3_.resize(sys.dim);
  k4_.resize(sys.dim);
  stage_.resize(sys.dim);
}

int SystemStepper::mode(double t, const Vector& x) {
  int m = 0;
  if (const auto* fixed = std::get_if<FixedMode>(&sys_.rule)) {
    m = fixed->mode;
  } else if (const auto* greedy = std::get_if<GreedyFeedback>(&sys_.rule)) {
    w_ = x.segment(greedy->window_start, greedy->window_size) + greedy->offset;
    if (greedy->features.size() > 0) {
      q_.noalias() = greedy->features * w_;
      m = greedy_mode_index(*greedy, q_);
    } else {
      m = greedy_mode_index(*greedy, w_);
    }
  } else {
    m = std::get<ModeSchedule>(sys_.rule).mode_at(t);
  }
  check_mode_range(sys_, m);
  return m;
}

void SystemStepper::field(double t, const Vector& x, Vector& out) {
  const int m = mode(t, x);
  out.noalias() = sys_.A[m] * x;
  out += sys_.b[m];
}

void SystemStepper::step(double& t, Vector& x, double dt) {
  field(t, x, k1_);
  stage_ = x + (0.5 * dt) * k1_;
  field(t + 0.5 * dt, stage_, k2_);
  stage_ = x + (0.5 * dt) * k2_;
  field(t + 0.5 * dt, stage_, k3_);
  stage_ = x + dt * k3_;
  field(t + dt, stage_, k4_);
  x += (dt / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
  t += dt;
}

std::vector<Matrix> tabular_mode_matrices(const Mdp& mdp) {
  require_valid(mdp);
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const Matrix DP = mdp.dist.asDiagonal() * stacked_transition(mdp);
  const Matrix D = diag_distribution(mdp);
  std::vector<Matrix> out;
  for (const auto& pi : enumerate_policies(S, A))
    out.push_back(mdp.gamma * DP * policy_matrix(pi, S, A) - D);
  return out;
}

std::vector<Matrix> averaging_mode_matrices(const Mdp& mdp, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  require_valid(mdp);
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const int n = mdp.pair_count();
  const Matrix DP = mdp.dist.asDiagonal() * stacked_transition(mdp);
  const Matrix D = diag_distribution(mdp);
  const Matrix I = Matrix::Identity(n, n);
  std::vector<Matrix> out;
  for (const auto& pi : enumerate_policies(S, A)) {
    Matrix Am = Matrix::Zero(2 * n, 2 * n);
    Am.topLeftCorner(n, n) = -D;
    Am.topRightCorner(n, n) = mdp.gamma * DP * policy_matrix(pi, S, A);
    Am.bottomLeftCorner(n, n) = delta * I;
    Am.bottomRightCorner(n, n) = -delta * I;
    out.push_back(std::move(Am));
  }
  return out;
}

std::vector<Matrix> lfa_mode_matrices(const Mdp& mdp, const FeatureMatrix& phi) {
  require_valid(mdp);
  if (phi.values.rows() != mdp.pair_count())
    throw std::invalid_argument("feature row count does not match |S||A|");
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const Matrix& F = phi.values;
  const Matrix FtDP = F.transpose() * mdp.dist.asDiagonal() * stacked_transition(mdp);
  const Matrix FtDF = F.transpose() * mdp.dist.asDiagonal() * F;
  std::vector<Matrix> out;
  for (const auto& pi : enumerate_policies(S, A))
    out.push_back(mdp.gamma * FtDP * policy_matrix(pi, S, A) * F - FtDF);
  return out;
}

namespace {

// b_pi = gamma D P (Pi_pi - Pi_ref) q_ref, optionally mapped through Phi^T.
std::vector<Vector> tabular_offsets(const Mdp& mdp, const Vector& q_ref, const Matrix* phi) {
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  Matrix DP = mdp.dist.asDiagonal() * stacked_transition(mdp);
  if (phi) DP = phi->transpose() * DP;
  const DeterministicPolicy pi_ref = greedy_policy(q_ref, S, A);
  const Vector ref_values = policy_matrix(pi_ref, S, A) * q_ref;
  std::vector<Vector> out;
  for (const auto& pi : enumerate_policies(S, A))
    out.push_back(mdp.gamma * (DP * (policy_matrix(pi, S, A) * q_ref - ref_values)));
  return out;
}

GreedyFeedback greedy_rule(const Mdp& mdp, Vector offset, Eigen::Index window_start,
                           Eigen::Index window_size, Matrix features = {}) {
  GreedyFeedback rule;
  rule.num_states = mdp.num_states;
  rule.num_actions = mdp.num_actions;
  rule.window_start = window_start;
  rule.window_size = window_size;
  rule.offset = std::move(offset);
  rule.features = std::move(features);
  return rule;
}

}  // namespace

SwitchedAffineSystem build_q_ode(const Mdp& mdp, const Vector& q_star) {
  SwitchedAffineSystem sys;
  sys.dim = mdp.pair_count();
  sys.A = tabular_mode_matrices(mdp);
  sys.b = tabular_offsets(mdp, q_star, nullptr);
  sys.rule = greedy_rule(mdp, q_star, 0, sys.dim);
  return sys;
}

std::pair<SwitchedAffineSystem, SwitchedAffineSystem> build_q_comparisons(const Mdp& mdp,
                                                                          const Vector& q_star) {
  const int n = mdp.pair_count();
  std::vector<Matrix> As = tabular_mode_matrices(mdp);
  const int optimal =
      (int)policy_index(greedy_policy(q_star, mdp.num_states, mdp.num_actions), mdp.num_actions);

  SwitchedAffineSystem upper;
  upper.dim = n;
  upper.A = As;
  upper.b.assign(As.size(), Vector::Zero(n));
  upper.rule = greedy_rule(mdp, Vector::Zero(n), 0, n);

  SwitchedAffineSystem lower;
  lower.dim = n;
  lower.A = {As[optimal]};
  lower.b = {Vector::Zero(n)};
  lower.rule = FixedMode{0};
  return {std::move(upper), std::move(lower)};
}

SwitchedAffineSystem build_averaging_ode(const Mdp& mdp, double delta, const Vector& q_star) {
  const int n = mdp.pair_count();
  SwitchedAffineSystem sys;
  sys.dim = 2 * n;
  sys.A = averaging_mode_matrices(mdp, delta);
  std::vector<Vector> tab = tabular_offsets(mdp, q_star, nullptr);
  for (auto& b : tab) {
    Vector full = Vector::Zero(2 * n);
    full.head(n) = b;
    sys.b.push_back(std::move(full));
  }
  sys.rule = greedy_rule(mdp, q_star, n, n);
  return sys;
}

std::pair<SwitchedAffineSystem, SwitchedAffineSystem> build_averaging_comparisons(
    const Mdp& mdp, double delta, const Vector& q_star) {
  const int n = mdp.pair_count();
  std::vector<Matrix> As = averaging_mode_matrices(mdp, delta);
  const int optimal =
      (int)policy_index(greedy_policy(q_star, mdp.num_states, mdp.num_actions), mdp.num_actions);

  SwitchedAffineSystem upper;
  upper.dim = 2 * n;
  upper.A = As;
  upper.b.assign(As.size(), Vector::Zero(2 * n));
  upper.rule = greedy_rule(mdp, Vector::Zero(n), n, n);

  SwitchedAffineSystem lower;
  lower.dim = 2 * n;
  lower.A = {As[optimal]};
  lower.b = {Vector::Zero(2 * n)};
  lower.rule = FixedMode{0};
  return {std::move(upper), std::move(lower)};
}

SwitchedAffineSystem build_lfa_ode(const Mdp& mdp, const FeatureMatrix& phi,
                                   const Vector& theta_star) {
  SwitchedAffineSystem sys;
  sys.dim = phi.features();
  sys.A = lfa_mode_matrices(mdp, phi);
  sys.b = tabular_offsets(mdp, phi.values * theta_star, &phi.values);
  sys.rule = greedy_rule(mdp, theta_star, 0, sys.dim, phi.values);
  return sys;
}

std::pair<SwitchedAffineSystem, SwitchedAffineSystem> build_lfa_comparisons(
    const Mdp& mdp, const FeatureMatrix& phi, const Vector& theta_star) {
  if (!phi.nonnegative || !phi.orthogonal_columns)
    throw std::invalid_argument(
        "comparison systems require nonnegative features with orthogonal columns");
  const int n = phi.features();
  std::vector<Matrix> As = lfa_mode_matrices(mdp, phi);
  const Vector q_ref = phi.values * theta_star;
  const int optimal =
      (int)policy_index(greedy_policy(q_ref, mdp.num_states, mdp.num_actions), mdp.num_actions);

  SwitchedAffineSystem upper;
  upper.dim = n;
  upper.A = As;
  upper.b.assign(As.size(), Vector::Zero(n));
  upper.rule = greedy_rule(mdp, Vector::Zero(n), 0, n, phi.values);

  SwitchedAffineSystem lower;
  lower.dim = n;
  lower.A = {As[optimal]};
  lower.b = {Vector::Zero(n)};
  lower.rule = FixedMode{0};
  return {std::move(upper), std::move(lower)};
}

Trajectory integrate(const SwitchedAffineSystem& sys, const Vector& x0, double t_final,
                     double dt, long record_stride) {
  if (!(dt > 0.0) || !(t_final > 0.0))
    throw std::invalid_argument("dt and t_final must be positive");
  if (record_stride < 1) throw std::invalid_argument("record_stride must be >= 1");
  if (x0.size() != sys.dim) throw std::invalid_argument("x0 dimension mismatch");

  const long steps = (long)std::ceil(t_final / dt - 1e-9);
  Trajectory traj;
  traj.times.reserve(steps / record_stride + 2);
  traj.states.reserve(steps / record_stride + 2);
  traj.modes.reserve(steps / record_stride + 2);

  SystemStepper stepper(sys);
  Vector x = x0;
  for (long k = 0; k < steps; ++k) {
    double t = k * dt;
    if (k % record_stride == 0) {
      traj.times.push_back(t);
      traj.states.push_back(x);
      traj.modes.push_back(stepper.mode(t, x));
    }
    const double h = std::min(dt, t_final - t);
    stepper.step(t, x, h);
    if (!x.allFinite())
      throw std::runtime_error("state became non-finite at t = " + std::to_string(t));
  }
  traj.times.push_back(t_final);
  traj.states.push_back(x);
  traj.modes.push_back(stepper.mode(t_final, x));
  return traj;
}

}  // namespace qode
