#pragma once

#include "qode/linear_fa.hpp"
#include "qode/mdp.hpp"
#include "qode/rng.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace qode {

/// alpha_k = scale / (k + offset + 1)^exponent with exponent in (0.5, 1],
/// which keeps the sums divergent and square-summable.
struct StepSizeSchedule {
  double scale = 1.0;
  double offset = 0.0;
  double exponent = 0.8;

  double alpha(long k) const { return scale / std::pow((double)k + offset + 1.0, exponent); }
  void validate() const;  // throws std::invalid_argument
};

struct TransitionSample {
  int state = 0;
  int action = 0;
  int next_state = 0;
  double reward = 0.0;
};

/// Draws (s, a) from the MDP's sampling distribution, s' from P_a(s, .), and
/// the reward R_a(s) plus optional zero-mean Gaussian noise.
TransitionSample sample_transition(const Mdp& mdp, SplitMix64& rng,
                                   double reward_noise_sigma = 0.0);

/// One tabular update: only component (s, a) changes, by
/// alpha (r + gamma max_a' q(s', a') - q(s, a)).
Vector q_learning_step(const Vector& q, const TransitionSample& sample, double alpha,
                       double gamma, int num_states, int num_actions);

/// One two-estimate update: the online vector changes at (s, a) using the
/// target maximum over the averaged vector at s'; the averaged vector moves
/// toward the online one by alpha * delta as a whole.
std::pair<Vector, Vector> averaging_q_learning_step(const Vector& q_online,
                                                    const Vector& q_average,
                                                    const TransitionSample& sample, double alpha,
                                                    double delta, double gamma, int num_states,
                                                    int num_actions);

/// One feature-space update:
/// theta + phi(s,a) alpha (r + gamma max_a' (Phi theta)(s', a') - (Phi theta)(s, a)).
Vector lfa_q_learning_step(const Vector& theta, const FeatureMatrix& phi,
                           const TransitionSample& sample, double alpha, double gamma,
                           int num_states, int num_actions);

enum class Algorithm { QLearning, AveragingQLearning, LfaQLearning };

std::string algorithm_name(Algorithm algorithm);

struct RunConfig {
  Algorithm algorithm = Algorithm::QLearning;
  long iterations = 2'000'000;
  std::uint64_t seed = 0;
  StepSizeSchedule schedule;
  double delta = 1.0;  // averaging coupling
  double reward_noise_sigma = 0.0;
  int log_points_per_decade = 16;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::string algorithm;
  long iterations = 0;
  std::vector<long> log_iterations;
  std::vector<double> log_errors;  // max-norm distance to the reference
  Vector final_iterate;

  double final_error(const Vector& reference) const {
    return (final_iterate - reference).lpNorm<Eigen::Infinity>();
  }
};

/// Seeded run of one algorithm. `reference` is Q* for the tabular algorithm,
/// the stacked (Q*; Q*) for the averaging one, and theta* under features.
/// Iterates start at zero; identical seeds give bitwise-identical records.
RunRecord run(const RunConfig& config, const Mdp& mdp, const FeatureMatrix* phi,
              const Vector& reference);

/// One-sample update direction minus the expected drift
/// D R + gamma D P Pi_{greedy(q)} q - D q; its conditional mean is zero.
Vector td_noise(const Mdp& mdp, const Vector& q, const TransitionSample& sample);

}  // namespace qode
