#include "qode/mdp.hpp"

#include "qode/harness.hpp"
#include "qode/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace qode;

namespace {

// Independent value-iteration oracle over state values, then Q from one backup.
Vector q_star_oracle(const Mdp& mdp, long sweeps) {
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  Vector v = Vector::Zero(S);
  for (long k = 0; k < sweeps; ++k) {
    Vector next(S);
    for (int s = 0; s < S; ++s) {
      double best = -1e300;
      for (int a = 0; a < A; ++a)
        best = std::max(best, mdp.rewards[a](s) + mdp.gamma * mdp.transitions[a].row(s).dot(v));
      next(s) = best;
    }
    v = next;
  }
  Vector q(S * A);
  for (int a = 0; a < A; ++a)
    q.segment(a * S, S) = mdp.rewards[a] + mdp.gamma * (mdp.transitions[a] * v);
  return q;
}

}  // namespace

TEST_CASE("validate accepts the example chain and localizes violations") {
  Mdp mdp = example_mdp();
  CHECK(validate(mdp).empty());

  Mdp broken = mdp;
  broken.transitions[0](0, 1) = 0.9;  // row sums to 1.1
  auto bad = validate(broken);
  REQUIRE(!bad.empty());
  CHECK(bad[0].find("row 0") != std::string::npos);
  CHECK(bad[0].find("1.1") != std::string::npos);

  Mdp zeroed = mdp;
  zeroed.dist(2) = 0.0;
  zeroed.dist(3) = mdp.dist(2) + mdp.dist(3);
  bad = validate(zeroed);
  REQUIRE(!bad.empty());
  CHECK(bad[0].find("strictly positive") != std::string::npos);

  CHECK_THROWS_AS(require_valid(zeroed), std::invalid_argument);
}

TEST_CASE("stacked_transition stacks per-action blocks action-major") {
  const Mdp mdp = example_mdp();
  const Matrix P = stacked_transition(mdp);
  REQUIRE(P.rows() == 4);
  REQUIRE(P.cols() == 2);
  Matrix expected(4, 2);
  expected << 0.2, 0.8, 0.3, 0.7, 0.5, 0.5, 0.7, 0.3;
  CHECK((P - expected).cwiseAbs().maxCoeff() == 0.0);

  Mdp single = mdp;
  single.num_actions = 1;
  single.transitions = {mdp.transitions[0]};
  single.rewards = {mdp.rewards[0]};
  single.dist = (Vector(2) << 0.5, 0.5).finished();
  CHECK((stacked_transition(single) - mdp.transitions[0]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stacked_transition rows sum to one on random instances") {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Mdp mdp = random_mdp(rng, 2 + (int)(rng.next() % 2), 2 + (int)(rng.next() % 2), 0.1, 0.95);
    const Matrix P = stacked_transition(mdp);
    for (int i = 0; i < P.rows(); ++i) CHECK(P.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (int a = 0; a < mdp.num_actions; ++a)
      CHECK((P.middleRows(a * mdp.num_states, mdp.num_states) - mdp.transitions[a])
                .cwiseAbs()
                .maxCoeff() == 0.0);
  }
}

TEST_CASE("diag_distribution") {
  Mdp uniform = example_mdp();
  uniform.dist = Vector::Constant(4, 0.25);
  CHECK((diag_distribution(uniform) - 0.25 * Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);

  const Mdp melo = melo_example_mdp();
  const Matrix D = diag_distribution(melo);
  CHECK(D(0, 0) == doctest::Approx(0.1));
  CHECK(D(1, 1) == doctest::Approx(0.35));
  CHECK(D(2, 2) == doctest::Approx(0.4));
  CHECK(D(3, 3) == doctest::Approx(0.15));
  CHECK(D.diagonal().minCoeff() > 0.0);
}

TEST_CASE("policy_matrix builds selector rows") {
  DeterministicPolicy first{{0, 0}};
  Matrix M = policy_matrix(first, 2, 2);
  Matrix expected(2, 4);
  expected << 1, 0, 0, 0, 0, 1, 0, 0;
  CHECK((M - expected).cwiseAbs().maxCoeff() == 0.0);

  DeterministicPolicy second{{1, 1}};
  M = policy_matrix(second, 2, 2);
  expected << 0, 0, 1, 0, 0, 0, 0, 1;
  CHECK((M - expected).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(policy_matrix(DeterministicPolicy{{2, 0}}, 2, 2), std::invalid_argument);
}

TEST_CASE("stacked_transition * policy_matrix is row-stochastic for every policy") {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Mdp mdp = random_mdp(rng, 3, 2, 0.1, 0.95);
    const Matrix P = stacked_transition(mdp);
    for (const auto& pi : enumerate_policies(3, 2)) {
      const Matrix chain = P * policy_matrix(pi, 3, 2);
      CHECK(chain.minCoeff() >= 0.0);
      for (int i = 0; i < chain.rows(); ++i)
        CHECK(chain.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("greedy_policy takes componentwise argmax with lowest-index ties") {
  const Vector q = (Vector(4) << 1, 2, 3, 0).finished();
  const DeterministicPolicy pi = greedy_policy(q, 2, 2);
  CHECK(pi.actions == std::vector<int>{1, 0});

  const Vector tied = (Vector(4) << 2, 1, 2, 5).finished();
  CHECK(greedy_policy(tied, 2, 2).actions == std::vector<int>{0, 1});
}

TEST_CASE("greedy_policy is scale invariant for positive factors") {
  SplitMix64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    Vector q(6);
    for (int i = 0; i < 6; ++i) q(i) = std::round(rng.next_uniform(-3, 3));  // forces ties
    const double c = std::pow(10.0, rng.next_uniform(-3, 3));
    CHECK(greedy_policy(q, 3, 2) == greedy_policy(c * q, 3, 2));
  }
}

TEST_CASE("bellman_operator") {
  Mdp mdp = example_mdp();

  SUBCASE("gamma = 0 returns the stacked rewards") {
    mdp.gamma = 0.0;
    SplitMix64 rng(3);
    Vector q(4);
    for (int i = 0; i < 4; ++i) q(i) = rng.next_uniform(-10, 10);
    CHECK((bellman_operator(mdp, q) - stacked_rewards(mdp)).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("Q* is a fixed point") {
    const Vector q_star = solve_q_star(mdp, 1e-13);
    CHECK((bellman_operator(mdp, q_star) - q_star).lpNorm<Eigen::Infinity>() < 1e-10);
  }

  SUBCASE("max-norm contraction with modulus gamma") {
    SplitMix64 rng(9);
    for (int trial = 0; trial < 100; ++trial) {
      Vector q1(4), q2(4);
      for (int i = 0; i < 4; ++i) {
        q1(i) = rng.next_uniform(-20, 20);
        q2(i) = rng.next_uniform(-20, 20);
      }
      const double lhs =
          (bellman_operator(mdp, q1) - bellman_operator(mdp, q2)).lpNorm<Eigen::Infinity>();
      CHECK(lhs <= mdp.gamma * (q1 - q2).lpNorm<Eigen::Infinity>() + 1e-12);
    }
  }
}

TEST_CASE("solve_q_star") {
  SUBCASE("single state single action is the geometric series") {
    Mdp tiny;
    tiny.num_states = 1;
    tiny.num_actions = 1;
    tiny.gamma = 0.9;
    tiny.transitions = {Matrix::Ones(1, 1)};
    tiny.rewards = {Vector::Ones(1)};
    tiny.dist = Vector::Ones(1);
    CHECK(solve_q_star(tiny)(0) == doctest::Approx(10.0).epsilon(1e-10));
  }

  SUBCASE("gamma = 0 returns rewards") {
    Mdp mdp = example_mdp();
    mdp.gamma = 0.0;
    CHECK((solve_q_star(mdp) - stacked_rewards(mdp)).lpNorm<Eigen::Infinity>() < 1e-12);
  }

  SUBCASE("example chain against the independent oracle and exact values") {
    const Mdp mdp = example_mdp();
    const Vector q = solve_q_star(mdp, 1e-13);
    CHECK((bellman_operator(mdp, q) - q).lpNorm<Eigen::Infinity>() < 1e-12);
    const Vector oracle = q_star_oracle(mdp, 600);
    CHECK((q - oracle).lpNorm<Eigen::Infinity>() < 1e-9);
    // closed-form fixed point: Q* = (582, 527.6, 563.8, 542) / 29
    CHECK(q(0) == doctest::Approx(582.0 / 29.0).epsilon(1e-11));
    CHECK(q(1) == doctest::Approx(527.6 / 29.0).epsilon(1e-11));
    CHECK(q(2) == doctest::Approx(563.8 / 29.0).epsilon(1e-11));
    CHECK(q(3) == doctest::Approx(542.0 / 29.0).epsilon(1e-11));
  }

  SUBCASE("start-point invariance") {
    const Mdp mdp = example_mdp();
    const double tol = 1e-11;
    const Vector a = solve_q_star(mdp, tol);
    // value iteration from a different start: shift the operator input
    Vector q = Vector::Constant(4, 50.0);
    for (int k = 0; k < 2000; ++k) q = bellman_operator(mdp, q);
    CHECK((a - q).lpNorm<Eigen::Infinity>() < 10 * tol);
  }

  SUBCASE("iteration cap errors out") {
    const Mdp mdp = example_mdp();
    CHECK_THROWS_AS(solve_q_star(mdp, 1e-13, 3), std::runtime_error);
  }
}

TEST_CASE("enumerate_policies is lexicographic with psi as position") {
  auto two = enumerate_policies(2, 2);
  REQUIRE(two.size() == 4);
  CHECK(two[0].actions == std::vector<int>{0, 0});
  CHECK(two[1].actions == std::vector<int>{0, 1});
  CHECK(two[2].actions == std::vector<int>{1, 0});
  CHECK(two[3].actions == std::vector<int>{1, 1});
  for (std::size_t i = 0; i < two.size(); ++i) CHECK(policy_index(two[i], 2) == (long)i);

  CHECK(enumerate_policies(3, 2).size() == 8);
  CHECK_THROWS_AS(enumerate_policies(30, 2), std::invalid_argument);
}

TEST_CASE("stationary_state_action_distribution") {
  SUBCASE("counterexample chain matches the closed-form stationary distribution") {
    const Mdp mdp = melo_example_mdp();
    BehaviorPolicy beta = example_behavior_policy();
    const Vector d = stationary_state_action_distribution(mdp.transitions, beta);
    CHECK(d(0) == doctest::Approx(0.1).epsilon(1e-10));
    CHECK(d(1) == doctest::Approx(0.35).epsilon(1e-10));
    CHECK(d(2) == doctest::Approx(0.4).epsilon(1e-10));
    CHECK(d(3) == doctest::Approx(0.15).epsilon(1e-10));
    // cross-check the state marginal mu = (0.5, 0.5) with a hand power iteration
    Matrix chain = Matrix::Zero(2, 2);
    for (int a = 0; a < 2; ++a)
      chain += beta.probs.col(a).asDiagonal() * mdp.transitions[a];
    Eigen::RowVector2d mu(0.9, 0.1);
    for (int k = 0; k < 5000; ++k) mu = mu * chain;
    CHECK(mu(0) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(d(0) + d(2) == doctest::Approx(0.5).epsilon(1e-10));
  }

  SUBCASE("example chain marginal is (3/7, 4/7)") {
    const Mdp mdp = example_mdp();
    const Vector d =
        stationary_state_action_distribution(mdp.transitions, example_behavior_policy());
    CHECK(d(0) + d(2) == doctest::Approx(3.0 / 7.0).epsilon(1e-12));
    CHECK(d(1) + d(3) == doctest::Approx(4.0 / 7.0).epsilon(1e-12));
    CHECK((d - mdp.dist).lpNorm<Eigen::Infinity>() < 1e-12);
  }

  SUBCASE("doubly stochastic chain with uniform behavior gives uniform pairs") {
    std::vector<Matrix> P = {(Matrix(2, 2) << 0.3, 0.7, 0.7, 0.3).finished(),
                             (Matrix(2, 2) << 0.6, 0.4, 0.4, 0.6).finished()};
    BehaviorPolicy beta;
    beta.probs = Matrix::Constant(2, 2, 0.5);
    const Vector d = stationary_state_action_distribution(P, beta);
    CHECK((d - Vector::Constant(4, 0.25)).lpNorm<Eigen::Infinity>() < 1e-12);
  }

  SUBCASE("periodic chain does not converge") {
    std::vector<Matrix> P = {(Matrix(2, 2) << 0, 1, 1, 0).finished()};
    BehaviorPolicy beta;
    beta.probs = Matrix::Ones(2, 1);
    CHECK_THROWS_AS(stationary_state_action_distribution(P, beta, 1e-12, 10'000),
                    std::runtime_error);
  }
}
