#include "qode/qlearn.hpp"

#include <cmath>
#include <stdexcept>

namespace qode {

void StepSizeSchedule::validate() const {
  if (!(scale > 0.0)) throw std::invalid_argument("step-size scale must be positive");
  if (!(offset >= 0.0)) throw std::invalid_argument("step-size offset must be nonnegative");
  if (!(exponent > 0.5 && exponent <= 1.0))
    throw std::invalid_argument("step-size exponent must lie in (0.5, 1]");
}

TransitionSample sample_transition(const Mdp& mdp, SplitMix64& rng, double reward_noise_sigma) {
  const int S = mdp.num_states;
  const int pair = rng.next_categorical(mdp.dist);
  const int a = pair / S;
  const int s = pair % S;
  const int s_next = rng.next_categorical(mdp.transitions[a].row(s).transpose());
  double r = mdp.rewards[a](s);
  if (reward_noise_sigma > 0.0) r += reward_noise_sigma * rng.next_gaussian();
  return TransitionSample{s, a, s_next, r};
}

namespace {

double max_over_actions(const Vector& q, int state, int num_states, int num_actions) {
  double best = q(state);
  for (int a = 1; a < num_actions; ++a) best = std::max(best, q(a * num_states + state));
  return best;
}

}  // namespace

Vector q_learning_step(const Vector& q, const TransitionSample& sample, double alpha,
                       double gamma, int num_states, int num_actions) {
  Vector next = q;
  const int i = sample.action * num_states + sample.state;
  const double target =
      sample.reward + gamma * max_over_actions(q, sample.next_state, num_states, num_actions);
  next(i) += alpha * (target - q(i));
  return next;
}

std::pair<Vector, Vector> averaging_q_learning_step(const Vector& q_online,
                                                    const Vector& q_average,
                                                    const TransitionSample& sample, double alpha,
                                                    double delta, double gamma, int num_states,
                                                    int num_actions) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  Vector online = q_online;
  const int i = sample.action * num_states + sample.state;
  const double target =
      sample.reward +
      gamma * max_over_actions(q_average, sample.next_state, num_states, num_actions);
  online(i) += alpha * (target - q_online(i));
  Vector average = q_average + (alpha * delta) * (q_online - q_average);
  return {std::move(online), std::move(average)};
}

Vector lfa_q_learning_step(const Vector& theta, const FeatureMatrix& phi,
                           const TransitionSample& sample, double alpha, double gamma,
                           int num_states, int num_actions) {
  const Matrix& F = phi.values;
  double next_best = F.row(sample.next_state).dot(theta);
  for (int a = 1; a < num_actions; ++a)
    next_best = std::max(next_best, F.row(a * num_states + sample.next_state).dot(theta));
  const int i = sample.action * num_states + sample.state;
  const double td = sample.reward + gamma * next_best - F.row(i).dot(theta);
  return theta + (alpha * td) * F.row(i).transpose();
}

std::string algorithm_name(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::QLearning: return "q";
    case Algorithm::AveragingQLearning: return "avgq";
    case Algorithm::LfaQLearning: return "lfa";
  }
  return "unknown";
}

namespace {

std::vector<long> geometric_grid(long iterations, int points_per_decade) {
  std::vector<long> grid{0};
  for (int i = 0;; ++i) {
    const long k = (long)std::llround(std::pow(10.0, (double)i / points_per_decade));
    if (k >= iterations) break;
    if (k > grid.back()) grid.push_back(k);
  }
  grid.push_back(iterations);
  return grid;
}

}  // namespace

RunRecord run(const RunConfig& config, const Mdp& mdp, const FeatureMatrix* phi,
              const Vector& reference) {
  require_valid(mdp);
  config.schedule.validate();
  if (config.iterations < 0) throw std::invalid_argument("iterations must be nonnegative");
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const int n = mdp.pair_count();

  Vector iterate;
  Vector average;  // averaging algorithm only
  switch (config.algorithm) {
    case Algorithm::QLearning:
      iterate = Vector::Zero(n);
      break;
    case Algorithm::AveragingQLearning:
      iterate = Vector::Zero(n);
      average = Vector::Zero(n);
      break;
    case Algorithm::LfaQLearning:
      if (!phi) throw std::invalid_argument("feature matrix required for the lfa algorithm");
      iterate = Vector::Zero(phi->features());
      break;
  }

  auto stacked = [&]() -> Vector {
    if (config.algorithm != Algorithm::AveragingQLearning) return iterate;
    Vector both(2 * n);
    both.head(n) = iterate;
    both.tail(n) = average;
    return both;
  };
  if (reference.size() != stacked().size())
    throw std::invalid_argument("reference dimension mismatch");

  RunRecord record;
  record.seed = config.seed;
  record.algorithm = algorithm_name(config.algorithm);
  record.iterations = config.iterations;

  SplitMix64 rng = SplitMix64::stream(config.seed, 0);
  const std::vector<long> grid = geometric_grid(config.iterations, config.log_points_per_decade);
  std::size_t next_log = 0;
  auto log_if_due = [&](long k) {
    if (next_log < grid.size() && grid[next_log] == k) {
      record.log_iterations.push_back(k);
      record.log_errors.push_back((stacked() - reference).lpNorm<Eigen::Infinity>());
      ++next_log;
    }
  };

  for (long k = 0; k < config.iterations; ++k) {
    log_if_due(k);
    const TransitionSample sample = sample_transition(mdp, rng, config.reward_noise_sigma);
    const double alpha = config.schedule.alpha(k);
    switch (config.algorithm) {
      case Algorithm::QLearning:
        iterate = q_learning_step(iterate, sample, alpha, mdp.gamma, S, A);
        break;
      case Algorithm::AveragingQLearning: {
        auto [online, avg] = averaging_q_learning_step(iterate, average, sample, alpha,
                                                       config.delta, mdp.gamma, S, A);
        iterate = std::move(online);
        average = std::move(avg);
        break;
      }
      case Algorithm::LfaQLearning:
        iterate = lfa_q_learning_step(iterate, *phi, sample, alpha, mdp.gamma, S, A);
        break;
    }
  }
  log_if_due(config.iterations);
  record.final_iterate = stacked();
  return record;
}

Vector td_noise(const Mdp& mdp, const Vector& q, const TransitionSample& sample) {
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const Vector maxima = state_maxima(q, S, A);

  // Expected drift D R + gamma D P Pi_{greedy(q)} q - D q.
  Vector drift(mdp.pair_count());
  for (int a = 0; a < A; ++a)
    drift.segment(a * S, S) = mdp.rewards[a] + mdp.gamma * (mdp.transitions[a] * maxima) -
                              q.segment(a * S, S);
  drift = mdp.dist.asDiagonal() * drift;

  Vector noise = -drift;
  const int i = sample.action * S + sample.state;
  noise(i) += sample.reward + mdp.gamma * maxima(sample.next_state) - q(i);
  return noise;
}

}  // namespace qode
