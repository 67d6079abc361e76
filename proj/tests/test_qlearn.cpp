#include "qode/qlearn.hpp"

#include "qode/harness.hpp"

#include <doctest.h>

#include <cmath>

using namespace qode;

TEST_CASE("StepSizeSchedule validation follows the divergent/square-summable rule") {
  CHECK_NOTHROW((StepSizeSchedule{1.0, 0.0, 0.8}.validate()));
  CHECK_NOTHROW((StepSizeSchedule{1.0, 5.0, 1.0}.validate()));
  CHECK_THROWS_AS((StepSizeSchedule{1.0, 0.0, 0.5}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((StepSizeSchedule{1.0, 0.0, 1.0001}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((StepSizeSchedule{0.0, 0.0, 0.8}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((StepSizeSchedule{1.0, -1.0, 0.8}.validate()), std::invalid_argument);
  CHECK((StepSizeSchedule{1.0, 0.0, 0.8}.alpha(0)) == doctest::Approx(1.0));
}

TEST_CASE("sample_transition") {
  SUBCASE("deterministic chain has the unique successor") {
    Mdp mdp;
    mdp.num_states = 2;
    mdp.num_actions = 1;
    mdp.gamma = 0.5;
    mdp.transitions = {(Matrix(2, 2) << 0, 1, 1, 0).finished()};
    mdp.rewards = {(Vector(2) << 2.0, -1.0).finished()};
    mdp.dist = Vector::Constant(2, 0.5);
    SplitMix64 rng(1);
    for (int k = 0; k < 100; ++k) {
      const TransitionSample sample = sample_transition(mdp, rng);
      CHECK(sample.next_state == 1 - sample.state);
      CHECK(sample.reward == mdp.rewards[0](sample.state));
    }
  }

  SUBCASE("empirical pair frequency approaches the sampling distribution") {
    const Mdp mdp = example_mdp();
    SplitMix64 rng = SplitMix64::stream(0, 3);
    Vector counts = Vector::Zero(4);
    const long draws = 100'000;
    for (long k = 0; k < draws; ++k) {
      const TransitionSample sample = sample_transition(mdp, rng);
      counts(mdp.pair_index(sample.state, sample.action)) += 1.0;
    }
    CHECK((counts / (double)draws - mdp.dist).lpNorm<Eigen::Infinity>() < 0.01);
  }
}

TEST_CASE("q_learning_step") {
  const TransitionSample sample{0, 1, 1, 3.0};
  Vector q = Vector::Zero(4);

  SUBCASE("full replacement at gamma 0, alpha 1") {
    const Vector next = q_learning_step(q, sample, 1.0, 0.0, 2, 2);
    CHECK(next(2) == 3.0);  // pair (s=0, a=1)
    CHECK(next(0) == 0.0);
    CHECK(next(1) == 0.0);
    CHECK(next(3) == 0.0);
  }

  SUBCASE("alpha 0 leaves the vector unchanged") {
    CHECK((q_learning_step(q, sample, 0.0, 0.9, 2, 2) - q).lpNorm<Eigen::Infinity>() == 0.0);
  }

  SUBCASE("half step from zero") {
    CHECK(q_learning_step(q, sample, 0.5, 0.9, 2, 2)(2) == doctest::Approx(1.5));
  }
}

TEST_CASE("averaging_q_learning_step") {
  const TransitionSample sample{1, 0, 0, 2.0};
  Vector qa = (Vector(4) << 1, 2, 3, 4).finished();

  SUBCASE("equal estimates leave the averaged vector fixed") {
    const auto [online, average] = averaging_q_learning_step(qa, qa, sample, 0.3, 2.0, 0.9, 2, 2);
    CHECK((average - qa).lpNorm<Eigen::Infinity>() == 0.0);
  }

  SUBCASE("alpha delta = 1 copies the online estimate") {
    Vector qb = Vector::Zero(4);
    const auto [online, average] = averaging_q_learning_step(qa, qb, sample, 0.5, 2.0, 0.9, 2, 2);
    CHECK((average - qa).lpNorm<Eigen::Infinity>() == 0.0);
  }

  SUBCASE("gamma 0 alpha 1 writes the sampled reward") {
    Vector qb = (Vector(4) << -1, -1, -1, -1).finished();
    const auto [online, average] =
        averaging_q_learning_step(Vector::Zero(4), qb, sample, 1.0, 0.5, 0.0, 2, 2);
    CHECK(online(1) == 2.0);  // pair (s=1, a=0)
  }

  CHECK_THROWS_AS(averaging_q_learning_step(qa, qa, sample, 0.5, 0.0, 0.9, 2, 2),
                  std::invalid_argument);
}

TEST_CASE("lfa_q_learning_step") {
  SUBCASE("identity features coincide with the tabular step") {
    const FeatureMatrix identity = FeatureMatrix::create(Matrix::Identity(4, 4));
    SplitMix64 rng(15);
    for (int trial = 0; trial < 50; ++trial) {
      Vector q(4);
      for (int i = 0; i < 4; ++i) q(i) = rng.next_uniform(-3, 3);
      const TransitionSample sample{(int)(rng.next() % 2), (int)(rng.next() % 2),
                                    (int)(rng.next() % 2), rng.next_uniform(-1, 1)};
      const Vector tab = q_learning_step(q, sample, 0.3, 0.9, 2, 2);
      const Vector lfa = lfa_q_learning_step(q, identity, sample, 0.3, 0.9, 2, 2);
      CHECK((tab - lfa).lpNorm<Eigen::Infinity>() < 1e-14);
    }
  }

  SUBCASE("zero feature row leaves theta unchanged") {
    Matrix F(4, 2);
    F << 1, 0, 0, 1, 0, 0, 0, 0;
    const FeatureMatrix phi = FeatureMatrix::create(F);
    const Vector theta = (Vector(2) << 1.0, -2.0).finished();
    const TransitionSample sample{0, 1, 1, 5.0};  // pair index 2: zero row
    CHECK((lfa_q_learning_step(theta, phi, sample, 0.7, 0.9, 2, 2) - theta)
              .lpNorm<Eigen::Infinity>() == 0.0);
  }

  SUBCASE("single feature arithmetic") {
    Matrix F(4, 1);
    F << 0.5, 2.0, 1.0, 0.7;
    const FeatureMatrix phi = FeatureMatrix::create(F);
    const TransitionSample sample{1, 0, 0, 1.0};  // pair index 1 has weight 2
    const Vector next = lfa_q_learning_step(Vector::Zero(1), phi, sample, 0.5, 0.9, 2, 2);
    CHECK(next(0) == doctest::Approx(1.0));  // 0 + 2 * 0.5 * (1 + 0 - 0)
  }
}

TEST_CASE("runs are bitwise deterministic given the seed") {
  const Mdp mdp = example_mdp();
  RunConfig config;
  config.iterations = 20'000;
  config.seed = 7;
  const Vector reference = solve_q_star(mdp);
  const RunRecord a = run(config, mdp, nullptr, reference);
  const RunRecord b = run(config, mdp, nullptr, reference);
  REQUIRE(a.final_iterate.size() == b.final_iterate.size());
  CHECK((a.final_iterate.array() == b.final_iterate.array()).all());
  CHECK(a.log_errors == b.log_errors);
  CHECK(a.log_iterations == b.log_iterations);
  CHECK(a.log_iterations.front() == 0);
  CHECK(a.log_iterations.back() == config.iterations);
}

TEST_CASE("short runs already move toward the fixed point") {
  const Mdp mdp = example_mdp();
  RunConfig config;
  config.iterations = 50'000;
  config.schedule = StepSizeSchedule{10.0, 17.0, 0.8};
  const Vector reference = solve_q_star(mdp);
  const RunRecord record = run(config, mdp, nullptr, reference);
  CHECK(record.log_errors.back() < 0.2 * record.log_errors.front());
}

TEST_CASE("error series tail is nonincreasing within 20 percent slack") {
  const Mdp mdp = example_mdp();
  RunConfig config;
  config.iterations = 200'000;  // default schedule, still in the decreasing phase
  const RunRecord record = run(config, mdp, nullptr, solve_q_star(mdp));
  REQUIRE(record.log_errors.size() >= 6);
  const std::size_t n = record.log_errors.size();
  for (std::size_t i = n - 5; i < n; ++i)
    CHECK(record.log_errors[i] <= 1.2 * record.log_errors[i - 1]);
}

TEST_CASE("td_noise") {
  const Mdp mdp = example_mdp();
  SplitMix64 rng(21);
  Vector q(4);
  for (int i = 0; i < 4; ++i) q(i) = rng.next_uniform(-5, 5);

  SUBCASE("probability-weighted average over the full sample space is zero") {
    Vector mean = Vector::Zero(4);
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a)
        for (int next = 0; next < 2; ++next) {
          const double p = mdp.dist(mdp.pair_index(s, a)) * mdp.transitions[a](s, next);
          const TransitionSample sample{s, a, next, mdp.rewards[a](s)};
          mean += p * td_noise(mdp, q, sample);
        }
    CHECK(mean.lpNorm<Eigen::Infinity>() < 1e-14);
  }

  SUBCASE("empirical mean obeys a CLT-scale bound") {
    const long draws = 100'000;
    Vector mean = Vector::Zero(4);
    double magnitude = 0.0;
    SplitMix64 sampler = SplitMix64::stream(0, 11);
    for (long k = 0; k < draws; ++k) {
      const TransitionSample sample = sample_transition(mdp, sampler);
      const Vector noise = td_noise(mdp, q, sample);
      magnitude = std::max(magnitude, noise.lpNorm<Eigen::Infinity>());
      mean += noise;
    }
    mean /= (double)draws;
    const double bound = 5.0 * magnitude / std::sqrt((double)draws);
    CHECK(mean.lpNorm<Eigen::Infinity>() < bound);
  }

  SUBCASE("one sample touches a single component beyond the dense drift") {
    const TransitionSample sample{0, 1, 1, mdp.rewards[1](0)};
    const Vector noise = td_noise(mdp, q, sample);
    const Vector maxima = state_maxima(q, 2, 2);
    Vector drift(4);
    for (int a = 0; a < 2; ++a)
      drift.segment(a * 2, 2) =
          mdp.rewards[a] + mdp.gamma * (mdp.transitions[a] * maxima) - q.segment(a * 2, 2);
    drift = mdp.dist.asDiagonal() * drift;
    const Vector sparse = noise + drift;  // observed one-sample direction
    for (int i = 0; i < 4; ++i)
      if (i != mdp.pair_index(0, 1)) CHECK(sparse(i) == 0.0);
  }
}
