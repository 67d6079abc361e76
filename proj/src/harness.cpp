#include "qode/harness.hpp"

#include "qode/json_io.hpp"
#include "qode/stability.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <stdexcept>

namespace qode {

Variant variant_from_string(const std::string& name) {
  if (name == "q") return Variant::Tabular;
  if (name == "avg") return Variant::Averaging;
  if (name == "lfa") return Variant::Lfa;
  throw std::invalid_argument("unknown variant '" + name + "' (expected q, avg or lfa)");
}

std::string variant_name(Variant variant) {
  switch (variant) {
    case Variant::Tabular: return "q";
    case Variant::Averaging: return "avg";
    case Variant::Lfa: return "lfa";
  }
  return "unknown";
}

void to_json(nlohmann::json& j, const SandwichResult& r) {
  j = nlohmann::json{{"max_lower_violation", r.max_lower_violation},
                     {"max_upper_violation", r.max_upper_violation},
                     {"horizon", r.horizon},
                     {"requested_horizon", r.requested_horizon},
                     {"holds", r.holds},
                     {"final_norm_original", r.final_norm_original},
                     {"final_norm_upper", r.final_norm_upper},
                     {"final_norm_lower", r.final_norm_lower},
                     {"norm_original_at_requested", r.norm_original_at_requested}};
}

namespace {

struct TripleSystems {
  SwitchedAffineSystem original;
  SwitchedAffineSystem upper;
  SwitchedAffineSystem lower;
  double certificate_rate = 0.0;  // |worst margin| of the mode family, 0 if none
};

TripleSystems build_triple(Variant variant, const Mdp& mdp, const SandwichOptions& options) {
  TripleSystems out;
  switch (variant) {
    case Variant::Tabular: {
      const Vector q_star = solve_q_star(mdp);
      out.original = build_q_ode(mdp, q_star);
      auto [upper, lower] = build_q_comparisons(mdp, q_star);
      out.upper = std::move(upper);
      out.lower = std::move(lower);
      out.certificate_rate = -check_qlearning(mdp).worst_margin;
      break;
    }
    case Variant::Averaging: {
      const Vector q_star = solve_q_star(mdp);
      out.original = build_averaging_ode(mdp, options.delta, q_star);
      auto [upper, lower] = build_averaging_comparisons(mdp, options.delta, q_star);
      out.upper = std::move(upper);
      out.lower = std::move(lower);
      out.certificate_rate = -check_averaging(mdp, options.delta).worst_margin;
      break;
    }
    case Variant::Lfa: {
      if (!options.features)
        throw std::invalid_argument("the lfa variant requires a feature matrix");
      const ThetaStar star = solve_theta_star(mdp, *options.features);
      out.original = build_lfa_ode(mdp, *options.features, star.theta);
      auto [upper, lower] = build_lfa_comparisons(mdp, *options.features, star.theta);
      out.upper = std::move(upper);
      out.lower = std::move(lower);
      out.certificate_rate = -check_lfa_new_condition(mdp, *options.features).worst_margin;
      break;
    }
  }
  if (out.certificate_rate < 0.0) out.certificate_rate = 0.0;
  return out;
}

struct TripleOutcome {
  double max_lower_violation = 0.0;
  double max_upper_violation = 0.0;
  double horizon = 0.0;
  double norm_original_at_requested = 0.0;
  double final_norm_original = 0.0, final_norm_upper = 0.0, final_norm_lower = 0.0;
  Trajectory original, upper, lower;  // filled only when recording
};

// Integrates original/upper/lower in lockstep from x0, x0 + eps, x0 - eps.
// Records rows inside [0, t_final] when `record`; optionally continues past
// t_final (unrecorded) until all three max-norms reach settle_norm or t_cap.
TripleOutcome run_triple(const TripleSystems& sys, const Vector& x0, double epsilon,
                         double t_final, double dt, bool record, long stride, bool extend,
                         double settle_norm, double t_cap) {
  if (!(dt > 0.0) || !(t_final > 0.0))
    throw std::invalid_argument("dt and t_final must be positive");
  TripleOutcome out;
  Vector x = x0;
  Vector u = x0 + Vector::Constant(x0.size(), epsilon);
  Vector l = x0 - Vector::Constant(x0.size(), epsilon);
  SystemStepper step_x(sys.original), step_u(sys.upper), step_l(sys.lower);

  double t = 0.0;
  long k = 0;
  bool captured_requested = false;
  while (true) {
    out.max_lower_violation = std::max(out.max_lower_violation, (l - x).maxCoeff());
    out.max_upper_violation = std::max(out.max_upper_violation, (x - u).maxCoeff());

    const bool reached_request = t >= t_final - 1e-9;
    if (record && !reached_request && k % stride == 0) {
      out.original.times.push_back(t);
      out.original.states.push_back(x);
      out.original.modes.push_back(step_x.mode(t, x));
      out.upper.times.push_back(t);
      out.upper.states.push_back(u);
      out.upper.modes.push_back(step_u.mode(t, u));
      out.lower.times.push_back(t);
      out.lower.states.push_back(l);
      out.lower.modes.push_back(step_l.mode(t, l));
    }
    if (reached_request && !captured_requested) {
      captured_requested = true;
      out.norm_original_at_requested = x.lpNorm<Eigen::Infinity>();
      if (record) {
        out.original.times.push_back(t);
        out.original.states.push_back(x);
        out.original.modes.push_back(step_x.mode(t, x));
        out.upper.times.push_back(t);
        out.upper.states.push_back(u);
        out.upper.modes.push_back(step_u.mode(t, u));
        out.lower.times.push_back(t);
        out.lower.states.push_back(l);
        out.lower.modes.push_back(step_l.mode(t, l));
      }
    }
    const double norm_x = x.lpNorm<Eigen::Infinity>();
    const double norm_u = u.lpNorm<Eigen::Infinity>();
    const double norm_l = l.lpNorm<Eigen::Infinity>();
    const bool settled = norm_x <= settle_norm && norm_u <= settle_norm && norm_l <= settle_norm;
    if (reached_request && (!extend || settled || t >= t_cap)) {
      out.horizon = t;
      out.final_norm_original = norm_x;
      out.final_norm_upper = norm_u;
      out.final_norm_lower = norm_l;
      break;
    }

    const double h = reached_request ? dt : std::min(dt, t_final - t);
    double t_next = t;
    step_x.step(t_next, x, h);
    t_next = t;
    step_u.step(t_next, u, h);
    t_next = t;
    step_l.step(t_next, l, h);
    t = t_next;
    ++k;
    if (!x.allFinite() || !u.allFinite() || !l.allFinite())
      throw std::runtime_error("sandwich integration blew up at t = " + std::to_string(t));
  }
  return out;
}

double settle_cap(const Vector& x0, double epsilon, double rate, double t_final, double hard_cap) {
  if (rate <= 0.0) return hard_cap;
  const double scale = x0.lpNorm<Eigen::Infinity>() + epsilon + 1.0;
  const double t = std::log(scale * 4e6) / rate;
  return std::min(hard_cap, std::max(t_final, t));
}

}  // namespace

SandwichResult verify_sandwich(Variant variant, const Mdp& mdp, const SandwichOptions& options,
                               const Vector& x0, double t_final, double dt, double tol) {
  const TripleSystems sys = build_triple(variant, mdp, options);
  if (x0.size() != sys.original.dim)
    throw std::invalid_argument("x0 has dimension " + std::to_string(x0.size()) + ", expected " +
                                std::to_string(sys.original.dim));
  const double cap =
      settle_cap(x0, options.epsilon, sys.certificate_rate, t_final, options.t_cap);
  const TripleOutcome run = run_triple(sys, x0, options.epsilon, t_final, dt, false, 1,
                                       options.extend_until_settled, options.settle_norm, cap);
  SandwichResult result;
  result.max_lower_violation = run.max_lower_violation;
  result.max_upper_violation = run.max_upper_violation;
  result.horizon = run.horizon;
  result.requested_horizon = t_final;
  result.final_norm_original = run.final_norm_original;
  result.final_norm_upper = run.final_norm_upper;
  result.final_norm_lower = run.final_norm_lower;
  result.norm_original_at_requested = run.norm_original_at_requested;
  result.holds = result.max_lower_violation <= tol && result.max_upper_violation <= tol;
  return result;
}

QuasiMonotoneResult verify_quasimonotone(const std::function<Vector(const Vector&)>& field,
                                         int dim, long trials, SplitMix64& rng, double slack) {
  QuasiMonotoneResult result;
  result.trials = trials;
  for (long trial = 0; trial < trials; ++trial) {
    Vector z(dim), p(dim);
    for (int i = 0; i < dim; ++i) z(i) = rng.next_uniform(-5.0, 5.0);
    for (int i = 0; i < dim; ++i) p(i) = rng.next_uniform(0.0, 2.0);
    const int hold = (int)(rng.next() % (std::uint64_t)dim);
    p(hold) = 0.0;
    const double base = field(z)(hold);
    const double perturbed = field(z + p)(hold);
    if (perturbed < base - slack) {
      result.passed = false;
      result.witness_point = z;
      result.witness_perturbation = p;
      result.witness_component = hold;
      result.perturbed_value = perturbed;
      result.base_value = base;
      return result;
    }
  }
  return result;
}

double verify_lipschitz(const std::function<Vector(const Vector&)>& field, int dim, long trials,
                        SplitMix64& rng) {
  double estimate = 0.0;
  for (long trial = 0; trial < trials; ++trial) {
    Vector x(dim), y(dim);
    for (int i = 0; i < dim; ++i) x(i) = rng.next_uniform(-5.0, 5.0);
    if (trial % 2 == 0) {
      for (int i = 0; i < dim; ++i) y(i) = rng.next_uniform(-5.0, 5.0);
    } else {
      const double scale = std::pow(10.0, rng.next_uniform(-3.0, 0.0));
      for (int i = 0; i < dim; ++i) y(i) = x(i) + scale * rng.next_uniform(-1.0, 1.0);
    }
    const double gap = (x - y).lpNorm<Eigen::Infinity>();
    if (gap == 0.0) continue;
    estimate = std::max(estimate, (field(x) - field(y)).lpNorm<Eigen::Infinity>() / gap);
  }
  return estimate;
}

double tabular_lipschitz_bound(const Mdp& mdp) {
  const Matrix DP = mdp.dist.asDiagonal() * stacked_transition(mdp);
  const double dp_norm = (mdp.gamma * DP).cwiseAbs().rowwise().sum().maxCoeff();
  return dp_norm + mdp.dist.maxCoeff();
}

Mdp example_mdp() {
  Mdp mdp;
  mdp.num_states = 2;
  mdp.num_actions = 2;
  mdp.gamma = 0.9;
  mdp.transitions = {(Matrix(2, 2) << 0.2, 0.8, 0.3, 0.7).finished(),
                     (Matrix(2, 2) << 0.5, 0.5, 0.7, 0.3).finished()};
  mdp.rewards = {(Vector(2) << 3.0, 1.0).finished(), (Vector(2) << 2.0, 1.0).finished()};
  // Stationary pair distribution of the behavior policy: mu = (3/7, 4/7).
  mdp.dist = (Vector(4) << 0.6 / 7.0, 2.8 / 7.0, 2.4 / 7.0, 1.2 / 7.0).finished();
  return mdp;
}

BehaviorPolicy example_behavior_policy() {
  BehaviorPolicy beta;
  beta.probs = (Matrix(2, 2) << 0.2, 0.8, 0.7, 0.3).finished();
  return beta;
}

Mdp binary_feature_example_mdp() {
  Mdp mdp;
  mdp.num_states = 2;
  mdp.num_actions = 2;
  mdp.gamma = 0.9;
  mdp.transitions = {(Matrix(2, 2) << 0.5, 0.5, 1.0, 0.0).finished(),
                     (Matrix(2, 2) << 0.0, 1.0, 2.0 / 3.0, 1.0 / 3.0).finished()};
  mdp.rewards = {Vector::Zero(2), Vector::Zero(2)};
  mdp.dist = Vector::Constant(4, 0.25);
  return mdp;
}

FeatureMatrix binary_feature_example_features() {
  Matrix F(4, 2);
  F << 1, 0, 1, 0, 0, 1, 0, 1;
  return FeatureMatrix::create(F);
}

Mdp melo_example_mdp() {
  Mdp mdp;
  mdp.num_states = 2;
  mdp.num_actions = 2;
  mdp.gamma = 0.9;
  mdp.transitions = {(Matrix(2, 2) << 0.5, 0.5, 1.0, 0.0).finished(),
                     (Matrix(2, 2) << 0.0, 1.0, 2.0 / 3.0, 1.0 / 3.0).finished()};
  mdp.rewards = {(Vector(2) << 3.0, 1.0).finished(), (Vector(2) << 2.0, 1.0).finished()};
  mdp.dist = (Vector(4) << 0.1, 0.35, 0.4, 0.15).finished();
  return mdp;
}

FeatureMatrix melo_example_features() {
  Matrix F(4, 1);
  F << 1, 2, 0, 1;
  return FeatureMatrix::create(F);
}

Vector melo_example_state_distribution() { return Vector::Constant(2, 0.5); }

namespace {

nlohmann::json trajectory_case(const std::string& case_name, Variant variant,
                               const std::string& out_dir, const ReproduceOptions& options,
                               std::vector<std::string>& files) {
  const Mdp mdp = example_mdp();
  SandwichOptions sopt;
  sopt.delta = 1.0;
  const TripleSystems sys = build_triple(variant, mdp, sopt);
  const Vector x0 = Vector::Ones(sys.original.dim);

  const long steps = (long)std::ceil(options.t_final / options.dt);
  const long stride = std::max<long>(1, steps / 200'000);
  const double cap = options.verify_settle
                         ? settle_cap(x0, sopt.epsilon, sys.certificate_rate, options.t_final,
                                      options.t_cap)
                         : options.t_final;
  const TripleOutcome run =
      run_triple(sys, x0, sopt.epsilon, options.t_final, options.dt, true, stride,
                 options.verify_settle, options.settle_norm, cap);

  // fig2/fig3 report the online / averaged halves of the doubled state.
  Eigen::Index col_start = 0;
  Eigen::Index col_count = sys.original.dim;
  if (case_name == "fig2") col_count = sys.original.dim / 2;
  if (case_name == "fig3") {
    col_start = sys.original.dim / 2;
    col_count = sys.original.dim / 2;
  }

  const std::filesystem::path dir = std::filesystem::path(out_dir) / case_name;
  std::filesystem::create_directories(dir);
  const struct {
    const char* name;
    const Trajectory* traj;
  } parts[] = {{"original", &run.original}, {"upper", &run.upper}, {"lower", &run.lower}};
  for (const auto& part : parts) {
    const std::string path = (dir / ("trajectory_" + std::string(part.name) + ".csv")).string();
    write_trajectory_csv(path, *part.traj, col_start, col_count);
    files.push_back(path);
  }
  if (options.svg) {
    const std::string path = (dir / "plot.svg").string();
    write_trajectory_svg(path, {{"original", "#000000", &run.original},
                                {"upper", "#cc0000", &run.upper},
                                {"lower", "#0000cc", &run.lower}},
                         col_start, col_count);
    files.push_back(path);
  }

  nlohmann::json report;
  report["case"] = case_name;
  report["variant"] = variant_name(variant);
  report["dt"] = options.dt;
  report["csv_window"] = options.t_final;
  report["record_stride"] = stride;
  report["sandwich"] = nlohmann::json{{"max_lower_violation", run.max_lower_violation},
                                      {"max_upper_violation", run.max_upper_violation}};
  report["norm_at_csv_window"] = run.norm_original_at_requested;
  report["settle"] = nlohmann::json{{"verified", options.verify_settle},
                                    {"horizon", run.horizon},
                                    {"final_norm_original", run.final_norm_original},
                                    {"final_norm_upper", run.final_norm_upper},
                                    {"final_norm_lower", run.final_norm_lower}};
  report["ok"] = run.max_lower_violation <= 1e-7 && run.max_upper_violation <= 1e-7 &&
                 (!options.verify_settle || run.final_norm_original <= 1e-6);
  return report;
}

std::vector<std::vector<int>> one_based(const std::vector<DeterministicPolicy>& policies) {
  std::vector<std::vector<int>> out;
  for (const auto& pi : policies) {
    std::vector<int> row;
    for (int a : pi.actions) row.push_back(a + 1);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace

ReproduceResult reproduce(const std::string& case_name, const std::string& out_dir,
                          const ReproduceOptions& options) {
  ReproduceResult result;
  result.case_name = case_name;

  if (case_name == "fig1") {
    result.report = trajectory_case(case_name, Variant::Tabular, out_dir, options, result.files_written);
  } else if (case_name == "fig2" || case_name == "fig3") {
    result.report =
        trajectory_case(case_name, Variant::Averaging, out_dir, options, result.files_written);
  } else if (case_name == "ex_binary") {
    const Mdp mdp = binary_feature_example_mdp();
    const FeatureMatrix phi = binary_feature_example_features();
    const StabilityReport report = check_lfa_new_condition(mdp, phi);
    result.report["case"] = case_name;
    result.report["binary_guarantee"] = check_binary_feature_guarantee(phi.values);
    result.report["new_condition"] = to_json_report(report);
    result.report["ok"] = report.holds;
  } else if (case_name == "ex_melo") {
    const Mdp mdp = melo_example_mdp();
    const FeatureMatrix phi = melo_example_features();
    const auto theta_phi = enumerate_theta_phi(mdp, phi);
    const StabilityReport fresh = check_lfa_new_condition(mdp, phi, theta_phi);
    const StabilityReport melo =
        check_melo_condition(melo_example_state_distribution(), mdp, phi, theta_phi);
    result.report["case"] = case_name;
    result.report["theta_phi"] = one_based(theta_phi);
    result.report["new_condition"] = to_json_report(fresh);
    result.report["melo"] = to_json_report(melo);
    result.report["new_holds"] = fresh.holds;
    result.report["melo_holds"] = melo.holds;
    result.report["ok"] = fresh.holds && !melo.holds;
  } else {
    throw std::invalid_argument("unknown case '" + case_name +
                                "' (expected fig1, fig2, fig3, ex_binary or ex_melo)");
  }

  const std::filesystem::path dir = std::filesystem::path(out_dir) / case_name;
  std::filesystem::create_directories(dir);
  const std::string report_path = (dir / "report.json").string();
  write_json_file(report_path, result.report);
  result.files_written.push_back(report_path);
  result.ok = result.report.value("ok", false);
  return result;
}

FuzzKind fuzz_kind_from_string(const std::string& name) {
  if (name == "tabular") return FuzzKind::Tabular;
  if (name == "averaging") return FuzzKind::Averaging;
  if (name == "lfa_binary") return FuzzKind::LfaBinary;
  if (name == "melo_implies_new") return FuzzKind::MeloImpliesNew;
  throw std::invalid_argument("unknown fuzz kind '" + name + "'");
}

std::string fuzz_kind_name(FuzzKind kind) {
  switch (kind) {
    case FuzzKind::Tabular: return "tabular";
    case FuzzKind::Averaging: return "averaging";
    case FuzzKind::LfaBinary: return "lfa_binary";
    case FuzzKind::MeloImpliesNew: return "melo_implies_new";
  }
  return "unknown";
}

void to_json(nlohmann::json& j, const FuzzSummary& s) {
  j = nlohmann::json{{"kind", s.kind},          {"trials", s.trials},
                     {"seed", s.seed},          {"violations", s.violations},
                     {"details", s.details},    {"melo_holds_count", s.melo_holds_count},
                     {"worst_final_norm", s.worst_final_norm}};
}

Mdp random_mdp(SplitMix64& rng, int num_states, int num_actions, double gamma_min,
               double gamma_max, double dist_uniform_mix) {
  auto exponential = [&rng]() {
    const double u = ((double)(rng.next() >> 11) + 0.5) * 0x1.0p-53;  // in (0, 1)
    return -std::log(u);
  };
  Mdp mdp;
  mdp.num_states = num_states;
  mdp.num_actions = num_actions;
  mdp.gamma = rng.next_uniform(gamma_min, gamma_max);
  for (int a = 0; a < num_actions; ++a) {
    Matrix P(num_states, num_states);
    for (int s = 0; s < num_states; ++s) {
      double sum = 0.0;
      for (int t = 0; t < num_states; ++t) {
        P(s, t) = exponential();
        sum += P(s, t);
      }
      P.row(s) /= sum;
    }
    mdp.transitions.push_back(std::move(P));
    Vector R(num_states);
    for (int s = 0; s < num_states; ++s) R(s) = rng.next_double();
    mdp.rewards.push_back(std::move(R));
  }
  const int pairs = num_states * num_actions;
  Vector d(pairs);
  for (int i = 0; i < pairs; ++i) d(i) = exponential();
  d /= d.sum();
  if (dist_uniform_mix > 0.0)
    d = (1.0 - dist_uniform_mix) * d + dist_uniform_mix * Vector::Constant(pairs, 1.0 / pairs);
  mdp.dist = std::move(d);
  return mdp;
}

BehaviorPolicy random_behavior_policy(SplitMix64& rng, int num_states, int num_actions) {
  auto exponential = [&rng]() {
    const double u = ((double)(rng.next() >> 11) + 0.5) * 0x1.0p-53;
    return -std::log(u);
  };
  BehaviorPolicy beta;
  beta.probs.resize(num_states, num_actions);
  for (int s = 0; s < num_states; ++s) {
    double sum = 0.0;
    for (int a = 0; a < num_actions; ++a) {
      beta.probs(s, a) = exponential();
      sum += beta.probs(s, a);
    }
    beta.probs.row(s) /= sum;
  }
  return beta;
}

FeatureMatrix random_partition_features(SplitMix64& rng, int pair_count, int num_features,
                                        bool binary) {
  if (num_features > pair_count)
    throw std::invalid_argument("more features than state-action pairs");
  std::vector<int> group(pair_count, -1);
  // one distinct row per column first, so every column is nonempty
  std::vector<int> rows(pair_count);
  for (int i = 0; i < pair_count; ++i) rows[i] = i;
  for (int i = pair_count - 1; i > 0; --i)
    std::swap(rows[i], rows[rng.next() % (std::uint64_t)(i + 1)]);
  for (int j = 0; j < num_features; ++j) group[rows[j]] = j;
  for (int i = num_features; i < pair_count; ++i) {
    // leave a row uncovered now and then; orthogonality only needs disjointness
    const std::uint64_t pick = rng.next() % (std::uint64_t)(num_features + 1);
    group[rows[i]] = pick == (std::uint64_t)num_features ? -1 : (int)pick;
  }
  Matrix F = Matrix::Zero(pair_count, num_features);
  for (int i = 0; i < pair_count; ++i)
    if (group[i] >= 0) F(i, group[i]) = binary ? 1.0 : rng.next_uniform(0.1, 3.0);
  return FeatureMatrix::create(F);
}

namespace {

std::string describe_violation(const Mdp& mdp, const std::string& what) {
  nlohmann::json j;
  j["what"] = what;
  j["mdp"] = to_json_mdp(mdp);
  return j.dump();
}

}  // namespace

FuzzSummary fuzz(const FuzzOptions& options) {
  if (options.trials < 1) throw std::invalid_argument("trials must be >= 1");
  FuzzSummary summary;
  summary.kind = fuzz_kind_name(options.kind);
  summary.trials = options.trials;
  summary.seed = options.seed;

  for (long trial = 0; trial < options.trials; ++trial) {
    SplitMix64 rng = SplitMix64::stream(options.seed, (std::uint64_t)trial);
    const int S =
        options.min_states + (int)(rng.next() % (std::uint64_t)(options.max_states -
                                                                options.min_states + 1));
    const int A =
        options.min_actions + (int)(rng.next() % (std::uint64_t)(options.max_actions -
                                                                 options.min_actions + 1));
    const Mdp mdp = random_mdp(rng, S, A, options.gamma_min, options.gamma_max,
                               options.dist_uniform_mix);

    auto check_sandwich = [&](Variant variant, const SandwichOptions& sopt, int dim,
                              const std::string& label) {
      const SandwichResult sv =
          verify_sandwich(variant, mdp, sopt, Vector::Ones(dim), options.sandwich_t_final,
                          options.sandwich_dt, options.sandwich_tol);
      const double endpoint = std::max(
          {sv.final_norm_original, sv.final_norm_upper, sv.final_norm_lower});
      summary.worst_final_norm = std::max(summary.worst_final_norm, endpoint);
      if (!sv.holds) {
        ++summary.violations;
        summary.details.push_back(describe_violation(mdp, label + " sandwich violated"));
        return false;
      }
      if (options.sandwich_extend_until_settled && endpoint > 1e-6) {
        ++summary.violations;
        summary.details.push_back(describe_violation(mdp, label + " endpoint above 1e-6"));
        return false;
      }
      return true;
    };

    switch (options.kind) {
      case FuzzKind::Tabular: {
        const StabilityReport report = check_qlearning(mdp);
        bool formula_ok = report.holds;
        for (const auto& mode : report.per_mode)
          for (int i = 0; i < mode.margins.size(); ++i)
            if (std::abs(mode.margins(i) - mdp.dist(i) * (mdp.gamma - 1.0)) > options.margin_tol)
              formula_ok = false;
        if (!formula_ok) {
          ++summary.violations;
          summary.details.push_back(describe_violation(mdp, "tabular margin formula"));
          break;
        }
        if (options.with_sandwich) {
          SandwichOptions sopt;
          sopt.extend_until_settled = options.sandwich_extend_until_settled;
          sopt.settle_norm = options.sandwich_settle_norm;
          check_sandwich(Variant::Tabular, sopt, mdp.pair_count(), "tabular");
        }
        break;
      }
      case FuzzKind::Averaging: {
        const double delta = std::exp(
            rng.next_uniform(std::log(options.delta_min), std::log(options.delta_max)));
        const StabilityReport report = check_averaging(mdp, delta);
        const double root = std::sqrt(mdp.gamma);
        const int n = mdp.pair_count();
        bool formula_ok = report.holds;
        for (const auto& mode : report.per_mode)
          for (int i = 0; i < mode.margins.size(); ++i) {
            const double expected = i < n ? mdp.dist(i) * (root - 1.0) : delta * (root - 1.0);
            if (std::abs(mode.margins(i) - expected) > options.margin_tol) formula_ok = false;
          }
        if (!formula_ok) {
          ++summary.violations;
          summary.details.push_back(describe_violation(mdp, "averaging margin formula"));
          break;
        }
        if (options.with_sandwich) {
          SandwichOptions sopt;
          sopt.delta = delta;
          sopt.extend_until_settled = options.sandwich_extend_until_settled;
          sopt.settle_norm = options.sandwich_settle_norm;
          check_sandwich(Variant::Averaging, sopt, 2 * mdp.pair_count(), "averaging");
        }
        break;
      }
      case FuzzKind::LfaBinary: {
        const int pairs = mdp.pair_count();
        const int n = 1 + (int)(rng.next() % (std::uint64_t)std::min(3, pairs - 1));
        const FeatureMatrix phi = random_partition_features(rng, pairs, n, true);
        if (!check_binary_feature_guarantee(phi.values)) {
          ++summary.violations;
          summary.details.push_back(describe_violation(mdp, "binary guarantee rejected"));
          break;
        }
        const StabilityReport report = check_lfa_new_condition(mdp, phi);
        if (!report.holds) {
          ++summary.violations;
          summary.details.push_back(
              describe_violation(mdp, "new condition failed under binary features"));
          break;
        }
        if (options.with_sandwich) {
          SandwichOptions sopt;
          sopt.features = &phi;
          sopt.extend_until_settled = options.sandwich_extend_until_settled;
          sopt.settle_norm = options.sandwich_settle_norm;
          check_sandwich(Variant::Lfa, sopt, n, "lfa");
        }
        break;
      }
      case FuzzKind::MeloImpliesNew: {
        // Stationary sampling distribution of a random behavior policy.
        const BehaviorPolicy beta = random_behavior_policy(rng, S, A);
        Mdp instance = mdp;
        instance.dist = stationary_state_action_distribution(instance.transitions, beta);
        Vector state_marginal = Vector::Zero(S);
        for (int a = 0; a < A; ++a)
          for (int s = 0; s < S; ++s) state_marginal(s) += instance.dist(a * S + s);

        // Binary features of any width, or scaled single features: the two
        // regimes where the implication is provable (see the notes ledger).
        const int pairs = instance.pair_count();
        const bool binary = trial % 2 == 0;
        const int n = binary ? 1 + (int)(rng.next() % (std::uint64_t)std::min(3, pairs - 1)) : 1;
        const FeatureMatrix phi = random_partition_features(rng, pairs, n, binary);

        const auto policies = enumerate_policies(S, A);
        const StabilityReport melo =
            check_melo_condition(state_marginal, instance, phi, policies);
        if (!melo.holds) break;
        ++summary.melo_holds_count;
        const StabilityReport fresh = check_lfa_new_condition(instance, phi, policies);
        if (!fresh.holds) {
          ++summary.violations;
          summary.details.push_back(
              describe_violation(instance, "Melo holds but the new condition fails"));
        }
        break;
      }
    }
  }
  return summary;
}

}  // namespace qode
