#include "qode/harness.hpp"

#include "qode/stability.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace qode;

namespace {

std::function<Vector(const Vector&)> linear_field(const Matrix& A) {
  return [A](const Vector& x) { return A * x; };
}

std::filesystem::path fresh_out_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() / ("qode_harness_" + tag);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("verify_quasimonotone") {
  SplitMix64 rng(3);

  SUBCASE("Metzler matrix passes") {
    Matrix A(2, 2);
    A << -1, 0.5, 0.2, -1;
    const QuasiMonotoneResult result = verify_quasimonotone(linear_field(A), 2, 2000, rng);
    CHECK(result.passed);
  }

  SUBCASE("negative off-diagonal fails with a witness") {
    Matrix A(2, 2);
    A << -1, -0.5, 0.2, -1;
    const QuasiMonotoneResult result = verify_quasimonotone(linear_field(A), 2, 2000, rng);
    REQUIRE(!result.passed);
    CHECK(result.witness_component >= 0);
    CHECK(result.perturbed_value < result.base_value - 1e-12);
    CHECK(result.witness_perturbation(result.witness_component) == 0.0);
    CHECK(result.witness_perturbation.minCoeff() >= 0.0);
  }

  SUBCASE("upper comparison field of the example chain is quasi-monotone") {
    const Mdp mdp = example_mdp();
    const auto [upper, lower] = build_q_comparisons(mdp, solve_q_star(mdp));
    const auto field = [&upper](const Vector& x) { return upper.field(0.0, x); };
    CHECK(verify_quasimonotone(field, 4, 10'000, rng).passed);
  }
}

TEST_CASE("verify_lipschitz") {
  SplitMix64 rng(5);

  SUBCASE("linear field estimate stays below the induced norm") {
    Matrix A(3, 3);
    for (int i = 0; i < 9; ++i) A(i / 3, i % 3) = rng.next_uniform(-2, 2);
    const double induced = A.cwiseAbs().rowwise().sum().maxCoeff();
    CHECK(verify_lipschitz(linear_field(A), 3, 2000, rng) <= induced + 1e-9);
  }

  SUBCASE("zero field has zero constant") {
    const auto zero = [](const Vector& x) { return Vector::Zero(x.size()).eval(); };
    CHECK(verify_lipschitz(zero, 3, 500, rng) == 0.0);
  }

  SUBCASE("example-chain fields respect the closed-form bound") {
    const Mdp mdp = example_mdp();
    const Vector q_star = solve_q_star(mdp);
    const SwitchedAffineSystem original = build_q_ode(mdp, q_star);
    const auto [upper, lower] = build_q_comparisons(mdp, q_star);
    const double bound = tabular_lipschitz_bound(mdp);
    const auto f = [&original](const Vector& x) { return original.field(0.0, x); };
    const auto fu = [&upper](const Vector& x) { return upper.field(0.0, x); };
    CHECK(verify_lipschitz(f, 4, 10'000, rng) <= bound + 1e-9);
    CHECK(verify_lipschitz(fu, 4, 10'000, rng) <= bound + 1e-9);
    CHECK(bound == doctest::Approx((1.0 + mdp.gamma) * mdp.dist.maxCoeff()).epsilon(1e-12));
  }
}

TEST_CASE("verify_sandwich") {
  SUBCASE("gamma = 0 keeps the exact initial ordering") {
    Mdp mdp = example_mdp();
    mdp.gamma = 0.0;
    SandwichOptions options;
    const SandwichResult result =
        verify_sandwich(Variant::Tabular, mdp, options, Vector::Ones(4), 10.0, 1e-3, 1e-7);
    CHECK(result.holds);
    CHECK(result.max_lower_violation <= 0.0);
    CHECK(result.max_upper_violation <= 0.0);
  }

  SUBCASE("example chain over a short window") {
    const Mdp mdp = example_mdp();
    SandwichOptions options;
    const SandwichResult result =
        verify_sandwich(Variant::Tabular, mdp, options, Vector::Ones(4), 10.0, 1e-3, 1e-8);
    CHECK(result.holds);
    CHECK(result.horizon == doctest::Approx(10.0));
    CHECK(result.final_norm_original > 0.5);  // slow decay, still far from 0
  }

  SUBCASE("averaging variant over a short window") {
    const Mdp mdp = example_mdp();
    SandwichOptions options;
    options.delta = 1.0;
    const SandwichResult result =
        verify_sandwich(Variant::Averaging, mdp, options, Vector::Ones(8), 10.0, 1e-3, 1e-8);
    CHECK(result.holds);
  }

  SUBCASE("feature variant settles fast on the counterexample") {
    const Mdp mdp = melo_example_mdp();
    const FeatureMatrix phi = melo_example_features();
    SandwichOptions options;
    options.features = &phi;
    const SandwichResult result =
        verify_sandwich(Variant::Lfa, mdp, options, Vector::Ones(1), 100.0, 1e-3, 1e-8);
    CHECK(result.holds);
    CHECK(result.final_norm_original < 1e-6);
  }

  SUBCASE("extension integrates until the settle norm") {
    const Mdp mdp = example_mdp();
    SandwichOptions options;
    options.extend_until_settled = true;
    const SandwichResult result =
        verify_sandwich(Variant::Tabular, mdp, options, Vector::Ones(4), 100.0, 1e-2, 1e-7);
    CHECK(result.holds);
    CHECK(result.norm_original_at_requested > 0.3);  // the t = 100 state is far from 0
    CHECK(result.final_norm_original <= 1e-7);
    CHECK(result.horizon > 1000.0);
    CHECK(result.horizon < 2000.0);
  }

  SUBCASE("x0 dimension is checked") {
    const Mdp mdp = example_mdp();
    CHECK_THROWS_AS(
        verify_sandwich(Variant::Tabular, mdp, {}, Vector::Ones(3), 1.0, 1e-3, 1e-7),
        std::invalid_argument);
  }
}

TEST_CASE("reproduce ex_binary emits the decomposed margins") {
  const auto dir = fresh_out_dir("binary");
  const ReproduceResult result = reproduce("ex_binary", dir.string());
  CHECK(result.ok);
  CHECK(result.report["binary_guarantee"] == true);
  const auto& mode = result.report["new_condition"]["per_mode"][1];
  CHECK(mode["policy"] == nlohmann::json::array({1, 2}));
  CHECK(std::abs(mode["diag"][0].get<double>() + 0.1625) < 1e-10);
  CHECK(std::abs(mode["offdiag"][0].get<double>() - 0.1125) < 1e-10);
  CHECK(std::filesystem::exists(dir / "ex_binary" / "report.json"));
}

TEST_CASE("reproduce ex_melo reports the verdict pair") {
  const auto dir = fresh_out_dir("melo");
  const ReproduceResult result = reproduce("ex_melo", dir.string());
  CHECK(result.ok);
  CHECK(result.report["new_holds"] == true);
  CHECK(result.report["melo_holds"] == false);
  CHECK(result.report["theta_phi"] == nlohmann::json::array({{1, 1}, {2, 2}}));
}

TEST_CASE("reproduce fig1 writes the trajectory files") {
  const auto dir = fresh_out_dir("fig1");
  ReproduceOptions options;
  options.t_final = 5.0;
  options.verify_settle = false;
  options.svg = true;
  const ReproduceResult result = reproduce("fig1", dir.string(), options);
  CHECK(result.ok);
  for (const char* name : {"trajectory_original.csv", "trajectory_upper.csv",
                           "trajectory_lower.csv", "plot.svg", "report.json"})
    CHECK(std::filesystem::exists(dir / "fig1" / name));
  std::ifstream csv(dir / "fig1" / "trajectory_original.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "t,x_0,x_1,x_2,x_3,mode");
}

TEST_CASE("reproduce fig1 settles to 1e-6 past the recorded window") {
  const auto dir = fresh_out_dir("fig1_settle");
  ReproduceOptions options;
  options.t_final = 20.0;  // short CSV window; the settle continuation is unrecorded
  const ReproduceResult result = reproduce("fig1", dir.string(), options);
  CHECK(result.ok);
  CHECK(result.report["settle"]["final_norm_original"].get<double>() <= 1e-6);
  CHECK(result.report["settle"]["final_norm_upper"].get<double>() <= 1e-6);
  CHECK(result.report["settle"]["final_norm_lower"].get<double>() <= 1e-6);
  CHECK(result.report["settle"]["horizon"].get<double>() > 1000.0);
  CHECK(result.report["sandwich"]["max_lower_violation"].get<double>() <= 1e-7);
  CHECK(result.report["sandwich"]["max_upper_violation"].get<double>() <= 1e-7);
}

TEST_CASE("reproduce fig3 selects the averaged block") {
  const auto dir = fresh_out_dir("fig3");
  ReproduceOptions options;
  options.t_final = 2.0;
  options.verify_settle = false;
  const ReproduceResult result = reproduce("fig3", dir.string(), options);
  CHECK(result.ok);
  std::ifstream csv(dir / "fig3" / "trajectory_original.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "t,x_0,x_1,x_2,x_3,mode");  // half of the 8-dim state
  CHECK_THROWS_AS(reproduce("fig9", dir.string()), std::invalid_argument);
}

TEST_CASE("fuzz") {
  SUBCASE("zero trials are rejected") {
    FuzzOptions options;
    options.trials = 0;
    CHECK_THROWS_AS(fuzz(options), std::invalid_argument);
  }

  SUBCASE("deterministic given kind, trials and seed") {
    FuzzOptions options;
    options.kind = FuzzKind::Tabular;
    options.trials = 5;
    options.seed = 9;
    options.with_sandwich = false;
    const FuzzSummary a = fuzz(options);
    const FuzzSummary b = fuzz(options);
    CHECK(a.violations == b.violations);
    CHECK(a.details == b.details);
    CHECK(a.violations == 0);
  }

  SUBCASE("tabular margins and short sandwiches hold") {
    FuzzOptions options;
    options.kind = FuzzKind::Tabular;
    options.trials = 10;
    options.seed = 2;
    options.sandwich_t_final = 20.0;
    CHECK(fuzz(options).violations == 0);
  }

  SUBCASE("averaging margins and short sandwiches hold") {
    FuzzOptions options;
    options.kind = FuzzKind::Averaging;
    options.trials = 5;
    options.seed = 3;
    options.sandwich_t_final = 20.0;
    CHECK(fuzz(options).violations == 0);
  }

  SUBCASE("binary features keep the guarantee and the ordering") {
    FuzzOptions options;
    options.kind = FuzzKind::LfaBinary;
    options.trials = 10;
    options.seed = 4;
    options.sandwich_t_final = 20.0;
    CHECK(fuzz(options).violations == 0);
  }

  SUBCASE("feature sandwiches hold over the full window") {
    FuzzOptions options;
    options.kind = FuzzKind::LfaBinary;
    options.trials = 5;
    options.seed = 6;
    options.sandwich_t_final = 100.0;
    CHECK(fuzz(options).violations == 0);
  }
}
