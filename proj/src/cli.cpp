#include "qode/cli.hpp"

#include "qode/harness.hpp"
#include "qode/json_io.hpp"
#include "qode/qlearn.hpp"
#include "qode/stability.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>

namespace qode {

namespace {

using nlohmann::json;

constexpr int kOk = 0;
constexpr int kConditionFailed = 1;
constexpr int kInvalidInput = 2;

void print_summary(const json& j) { std::cout << j.dump() << std::endl; }

int fail_invalid(const std::string& message) {
  std::cerr << json{{"error", message}}.dump() << std::endl;
  return kInvalidInput;
}

struct CheckArgs {
  std::string variant = "q";
  bool melo = false;
  std::string mdp_path, features_path, out_dir;
  double delta = 1.0;
  double gamma_override = -1.0;
  std::string policy_set = "theta";
};

int run_check(const CheckArgs& args) {
  Mdp mdp = load_mdp(args.mdp_path);
  if (args.gamma_override >= 0.0) {
    mdp.gamma = args.gamma_override;
    require_valid(mdp);
  }
  const Variant variant = variant_from_string(args.variant);

  StabilityReport report;
  if (variant == Variant::Tabular) {
    report = check_qlearning(mdp);
  } else if (variant == Variant::Averaging) {
    report = check_averaging(mdp, args.delta);
  } else {
    if (args.features_path.empty())
      throw std::invalid_argument("--features is required for --variant lfa");
    const FeatureMatrix phi = load_features(args.features_path);
    std::vector<DeterministicPolicy> policies;
    if (args.policy_set == "theta-phi")
      policies = enumerate_theta_phi(mdp, phi);
    else if (args.policy_set == "theta")
      policies = enumerate_policies(mdp.num_states, mdp.num_actions);
    else
      throw std::invalid_argument("--policy-set must be theta or theta-phi");
    if (args.melo) {
      Vector state_marginal = Vector::Zero(mdp.num_states);
      for (int a = 0; a < mdp.num_actions; ++a)
        for (int s = 0; s < mdp.num_states; ++s)
          state_marginal(s) += mdp.dist(a * mdp.num_states + s);
      report = check_melo_condition(state_marginal, mdp, phi, policies);
    } else {
      report = check_lfa_new_condition(mdp, phi, policies);
    }
  }

  json out = to_json_report(report);
  out["check"] = args.melo ? "melo" : args.variant;
  if (!args.out_dir.empty()) {
    std::filesystem::create_directories(args.out_dir);
    write_json_file((std::filesystem::path(args.out_dir) / "report.json").string(), out);
  }
  print_summary(out);
  return report.holds ? kOk : kConditionFailed;
}

struct SimulateArgs {
  std::string variant = "q";
  std::string mdp_path, features_path;
  std::string out_dir = "out";
  bool compare = false;
  double delta = 1.0;
  double dt = 1e-3;
  double t_final = 100.0;
  double x0_fill = 1.0;
  double epsilon = 1e-6;
  double gamma_override = -1.0;
  long record_stride = 1;
};

int run_simulate(const SimulateArgs& args) {
  Mdp mdp = load_mdp(args.mdp_path);
  if (args.gamma_override >= 0.0) {
    mdp.gamma = args.gamma_override;
    require_valid(mdp);
  }
  const Variant variant = variant_from_string(args.variant);
  FeatureMatrix phi;
  SandwichOptions options;
  options.delta = args.delta;
  options.epsilon = args.epsilon;
  if (variant == Variant::Lfa) {
    if (args.features_path.empty())
      throw std::invalid_argument("--features is required for --variant lfa");
    phi = load_features(args.features_path);
    options.features = &phi;
  }

  std::filesystem::create_directories(args.out_dir);
  json summary{{"variant", args.variant}, {"dt", args.dt}, {"t_final", args.t_final}};

  SwitchedAffineSystem original;
  SwitchedAffineSystem upper, lower;
  if (variant == Variant::Tabular) {
    const Vector q_star = solve_q_star(mdp);
    original = build_q_ode(mdp, q_star);
    if (args.compare) std::tie(upper, lower) = build_q_comparisons(mdp, q_star);
  } else if (variant == Variant::Averaging) {
    const Vector q_star = solve_q_star(mdp);
    original = build_averaging_ode(mdp, args.delta, q_star);
    if (args.compare) std::tie(upper, lower) = build_averaging_comparisons(mdp, args.delta, q_star);
  } else {
    const ThetaStar star = solve_theta_star(mdp, phi);
    original = build_lfa_ode(mdp, phi, star.theta);
    if (args.compare) std::tie(upper, lower) = build_lfa_comparisons(mdp, phi, star.theta);
    summary["theta_star"] = star.theta(0);
  }

  const Vector x0 = Vector::Constant(original.dim, args.x0_fill);
  const std::filesystem::path dir(args.out_dir);
  if (args.compare) {
    const SandwichResult sandwich =
        verify_sandwich(variant, mdp, options, x0, args.t_final, args.dt, 1e-7);
    const Vector offset = Vector::Constant(original.dim, args.epsilon);
    const Trajectory t_orig = integrate(original, x0, args.t_final, args.dt, args.record_stride);
    const Trajectory t_up = integrate(upper, x0 + offset, args.t_final, args.dt, args.record_stride);
    const Trajectory t_low = integrate(lower, x0 - offset, args.t_final, args.dt, args.record_stride);
    write_trajectory_csv((dir / "trajectory_original.csv").string(), t_orig);
    write_trajectory_csv((dir / "trajectory_upper.csv").string(), t_up);
    write_trajectory_csv((dir / "trajectory_lower.csv").string(), t_low);
    json sj;
    to_json(sj, sandwich);
    summary["sandwich"] = sj;
    print_summary(summary);
    return sandwich.holds ? kOk : kConditionFailed;
  }
  const Trajectory traj = integrate(original, x0, args.t_final, args.dt, args.record_stride);
  write_trajectory_csv((dir / "trajectory_original.csv").string(), traj);
  summary["final_norm"] = traj.states.back().lpNorm<Eigen::Infinity>();
  print_summary(summary);
  return kOk;
}

struct LearnArgs {
  std::string algorithm = "q";
  std::string mdp_path, features_path;
  std::string out_dir = "out";
  long iterations = 2'000'000;
  std::uint64_t seed = 0;
  double alpha_scale = 1.0;
  double alpha_offset = 0.0;
  double alpha_exponent = 0.8;
  double delta = 1.0;
  double sigma = 0.0;
  double tol = 1e-10;
  double gamma_override = -1.0;
};

int run_learn(const LearnArgs& args) {
  Mdp mdp = load_mdp(args.mdp_path);
  if (args.gamma_override >= 0.0) {
    mdp.gamma = args.gamma_override;
    require_valid(mdp);
  }
  RunConfig config;
  config.iterations = args.iterations;
  config.seed = args.seed;
  config.schedule = StepSizeSchedule{args.alpha_scale, args.alpha_offset, args.alpha_exponent};
  config.schedule.validate();
  config.delta = args.delta;
  config.reward_noise_sigma = args.sigma;

  FeatureMatrix phi;
  const FeatureMatrix* phi_ptr = nullptr;
  Vector reference;
  if (args.algorithm == "q") {
    config.algorithm = Algorithm::QLearning;
    reference = solve_q_star(mdp, std::min(args.tol, 1e-12));
  } else if (args.algorithm == "avgq") {
    config.algorithm = Algorithm::AveragingQLearning;
    const Vector q_star = solve_q_star(mdp, std::min(args.tol, 1e-12));
    reference.resize(2 * q_star.size());
    reference.head(q_star.size()) = q_star;
    reference.tail(q_star.size()) = q_star;
  } else if (args.algorithm == "lfa") {
    if (args.features_path.empty())
      throw std::invalid_argument("--features is required for --algorithm lfa");
    config.algorithm = Algorithm::LfaQLearning;
    phi = load_features(args.features_path);
    phi_ptr = &phi;
    reference = solve_theta_star(mdp, phi, args.tol).theta;
  } else {
    throw std::invalid_argument("--algorithm must be q, avgq or lfa");
  }

  const RunRecord record = run(config, mdp, phi_ptr, reference);
  json out = to_json_run(record);
  out["final_error"] = record.final_error(reference);
  std::filesystem::create_directories(args.out_dir);
  write_json_file((std::filesystem::path(args.out_dir) / "run.json").string(), out);
  json summary{{"algorithm", record.algorithm},
               {"seed", record.seed},
               {"iterations", record.iterations},
               {"final_error", record.final_error(reference)}};
  print_summary(summary);
  return kOk;
}

struct ReproduceArgs {
  std::string case_name;
  std::string out_dir = "out";
  double dt = 1e-3;
  double t_final = 100.0;
  bool svg = false;
  bool no_settle = false;
};

int run_reproduce(const ReproduceArgs& args) {
  ReproduceOptions options;
  options.dt = args.dt;
  options.t_final = args.t_final;
  options.svg = args.svg;
  options.verify_settle = !args.no_settle;
  const ReproduceResult result = reproduce(args.case_name, args.out_dir, options);
  json summary = result.report;
  summary["files"] = result.files_written;
  print_summary(summary);
  return result.ok ? kOk : kConditionFailed;
}

struct FuzzArgs {
  std::string kind = "tabular";
  long trials = 100;
  std::uint64_t seed = 0;
  bool no_sandwich = false;
  double sandwich_t_final = 100.0;
  double sandwich_dt = 1e-3;
};

int run_fuzz(const FuzzArgs& args) {
  FuzzOptions options;
  options.kind = fuzz_kind_from_string(args.kind);
  options.trials = args.trials;
  options.seed = args.seed;
  options.with_sandwich = !args.no_sandwich;
  options.sandwich_t_final = args.sandwich_t_final;
  options.sandwich_dt = args.sandwich_dt;
  const FuzzSummary summary = fuzz(options);
  json out;
  to_json(out, summary);
  print_summary(out);
  return summary.violations == 0 ? kOk : kConditionFailed;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{
      "Switched affine ODE models of Q-learning variants: stability certificates,\n"
      "comparison-system simulation, and seeded stochastic runs."};
  app.require_subcommand(1);

  CheckArgs check;
  auto* check_cmd = app.add_subcommand("check", "Run an algebraic stability certificate");
  check_cmd->add_option("--variant", check.variant, "q | avg | lfa")->capture_default_str();
  check_cmd->add_flag("--melo", check.melo, "Check the spectral condition instead (lfa only)");
  check_cmd->add_option("--mdp", check.mdp_path, "MDP JSON file")->required();
  check_cmd->add_option("--features", check.features_path, "Feature JSON file (lfa)");
  check_cmd->add_option("--delta", check.delta, "Averaging coupling")->capture_default_str();
  check_cmd->add_option("--gamma", check.gamma_override, "Override the MDP discount");
  check_cmd->add_option("--policy-set", check.policy_set, "theta | theta-phi (lfa)")
      ->capture_default_str();
  check_cmd->add_option("--out", check.out_dir, "Directory for report.json");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Integrate the switched ODE model");
  sim_cmd->add_option("--variant", sim.variant, "q | avg | lfa")->capture_default_str();
  sim_cmd->add_option("--mdp", sim.mdp_path, "MDP JSON file")->required();
  sim_cmd->add_option("--features", sim.features_path, "Feature JSON file (lfa)");
  sim_cmd->add_flag("--compare", sim.compare, "Also emit upper/lower comparison trajectories");
  sim_cmd->add_option("--delta", sim.delta, "Averaging coupling")->capture_default_str();
  sim_cmd->add_option("--dt", sim.dt, "RK4 step")->capture_default_str();
  sim_cmd->add_option("--t-final", sim.t_final, "Integration horizon")->capture_default_str();
  sim_cmd->add_option("--x0-fill", sim.x0_fill, "Initial state fill value (shifted coordinates)")
      ->capture_default_str();
  sim_cmd->add_option("--epsilon", sim.epsilon, "Strict comparison offset")->capture_default_str();
  sim_cmd->add_option("--gamma", sim.gamma_override, "Override the MDP discount");
  sim_cmd->add_option("--record-stride", sim.record_stride, "Record every k-th step")
      ->capture_default_str();
  sim_cmd->add_option("--out", sim.out_dir, "Output directory")->capture_default_str();

  LearnArgs learn;
  auto* learn_cmd = app.add_subcommand("learn", "Run a seeded stochastic algorithm");
  learn_cmd->add_option("--algorithm", learn.algorithm, "q | avgq | lfa")->capture_default_str();
  learn_cmd->add_option("--mdp", learn.mdp_path, "MDP JSON file")->required();
  learn_cmd->add_option("--features", learn.features_path, "Feature JSON file (lfa)");
  learn_cmd->add_option("--iters", learn.iterations, "Iteration budget")->capture_default_str();
  learn_cmd->add_option("--seed", learn.seed, "Base seed")->capture_default_str();
  learn_cmd->add_option("--alpha-scale", learn.alpha_scale, "Step-size scale c")
      ->capture_default_str();
  learn_cmd->add_option("--alpha-offset", learn.alpha_offset, "Step-size offset k0")
      ->capture_default_str();
  learn_cmd->add_option("--alpha-exponent", learn.alpha_exponent, "Step-size exponent in (0.5, 1]")
      ->capture_default_str();
  learn_cmd->add_option("--delta", learn.delta, "Averaging coupling")->capture_default_str();
  learn_cmd->add_option("--sigma", learn.sigma, "Reward noise standard deviation")
      ->capture_default_str();
  learn_cmd->add_option("--tol", learn.tol, "Reference fixed-point tolerance")
      ->capture_default_str();
  learn_cmd->add_option("--gamma", learn.gamma_override, "Override the MDP discount");
  learn_cmd->add_option("--out", learn.out_dir, "Output directory")->capture_default_str();

  ReproduceArgs rep;
  auto* rep_cmd = app.add_subcommand("reproduce", "Re-run an embedded study case");
  rep_cmd->add_option("case", rep.case_name, "fig1 | fig2 | fig3 | ex_binary | ex_melo")
      ->required();
  rep_cmd->add_option("--out", rep.out_dir, "Output directory")->capture_default_str();
  rep_cmd->add_option("--dt", rep.dt, "RK4 step")->capture_default_str();
  rep_cmd->add_option("--t-final", rep.t_final, "Recorded CSV window")->capture_default_str();
  rep_cmd->add_flag("--svg", rep.svg, "Also write plot.svg");
  rep_cmd->add_flag("--no-settle", rep.no_settle, "Skip the settle-horizon verification");

  FuzzArgs fz;
  auto* fuzz_cmd = app.add_subcommand("fuzz", "Randomized property checks");
  fuzz_cmd->add_option("--kind", fz.kind, "tabular | averaging | lfa_binary | melo_implies_new")
      ->capture_default_str();
  fuzz_cmd->add_option("--trials", fz.trials, "Trial count")->capture_default_str();
  fuzz_cmd->add_option("--seed", fz.seed, "Base seed")->capture_default_str();
  fuzz_cmd->add_flag("--no-sandwich", fz.no_sandwich, "Skip per-trial sandwich integration");
  fuzz_cmd->add_option("--sandwich-t-final", fz.sandwich_t_final, "Sandwich horizon")
      ->capture_default_str();
  fuzz_cmd->add_option("--sandwich-dt", fz.sandwich_dt, "Sandwich RK4 step")
      ->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << nlohmann::json{{"error", e.what()}}.dump() << std::endl;
    return kInvalidInput;
  }

  try {
    if (*check_cmd) return run_check(check);
    if (*sim_cmd) return run_simulate(sim);
    if (*learn_cmd) return run_learn(learn);
    if (*rep_cmd) return run_reproduce(rep);
    if (*fuzz_cmd) return run_fuzz(fz);
  } catch (const std::exception& e) {
    return fail_invalid(e.what());
  }
  return fail_invalid("no subcommand given");
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.push_back(argv[i]);
  return dispatch(args);
}

}  // namespace qode
