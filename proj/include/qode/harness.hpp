#pragma once

#include "qode/linear_fa.hpp"
#include "qode/mdp.hpp"
#include "qode/rng.hpp"
#include "qode/switching.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace qode {

enum class Variant { Tabular, Averaging, Lfa };

Variant variant_from_string(const std::string& name);  // "q" | "avg" | "lfa"
std::string variant_name(Variant variant);

struct SandwichOptions {
  double delta = 1.0;                       // averaging coupling
  const FeatureMatrix* features = nullptr;  // required for the lfa variant
  double epsilon = 1e-6;                    // strict initial ordering offset
  bool extend_until_settled = false;        // integrate past t_final until norms settle
  double settle_norm = 1e-7;
  double t_cap = 50'000.0;
};

/// Componentwise ordering check lower <= original <= upper along joint RK4
/// trajectories started from x0 - eps, x0, x0 + eps.
struct SandwichResult {
  double max_lower_violation = 0.0;
  double max_upper_violation = 0.0;
  double horizon = 0.0;            // time actually integrated to
  double requested_horizon = 0.0;  // the t_final that was asked for
  bool holds = false;              // violations within tolerance
  double final_norm_original = 0.0;
  double final_norm_upper = 0.0;
  double final_norm_lower = 0.0;
  double norm_original_at_requested = 0.0;  // |x(t_final)|_inf before any extension
};

void to_json(nlohmann::json& j, const SandwichResult& r);

SandwichResult verify_sandwich(Variant variant, const Mdp& mdp, const SandwichOptions& options,
                               const Vector& x0, double t_final, double dt, double tol);

struct QuasiMonotoneResult {
  bool passed = true;
  long trials = 0;
  // first counterexample, present when !passed
  Vector witness_point, witness_perturbation;
  int witness_component = -1;
  double perturbed_value = 0.0, base_value = 0.0;
};

/// Samples z and nonnegative p with p_i = 0 and asserts
/// field(z + p)_i >= field(z)_i - slack.
QuasiMonotoneResult verify_quasimonotone(const std::function<Vector(const Vector&)>& field,
                                         int dim, long trials, SplitMix64& rng,
                                         double slack = 1e-12);

/// Max over sampled pairs of |f(x) - f(y)|_inf / |x - y|_inf.
double verify_lipschitz(const std::function<Vector(const Vector&)>& field, int dim, long trials,
                        SplitMix64& rng);

/// |gamma D P|_inf + |D|_inf, the closed-form Lipschitz bound of the tabular field.
double tabular_lipschitz_bound(const Mdp& mdp);

/// The 2-state 2-action chain used by the simulation studies; the sampling
/// distribution is the stationary one of its behavior policy.
Mdp example_mdp();
BehaviorPolicy example_behavior_policy();

/// 2-state 2-action chain with uniform sampling and a binary two-feature
/// aggregation (rewards zero; only the stability conditions use it).
Mdp binary_feature_example_mdp();
FeatureMatrix binary_feature_example_features();

/// The single-feature instance on which the spectral condition fails while
/// the row-margin condition holds. Rewards borrowed from example_mdp so the
/// stochastic algorithm has a well-defined fixed point.
Mdp melo_example_mdp();
FeatureMatrix melo_example_features();
Vector melo_example_state_distribution();  // stationary state marginal (0.5, 0.5)

struct ReproduceOptions {
  double dt = 1e-3;
  double t_final = 100.0;  // recorded CSV window for the trajectory cases
  bool svg = false;
  bool verify_settle = true;  // continue unrecorded until trajectories reach 1e-7
  double settle_norm = 1e-7;
  double t_cap = 50'000.0;
};

struct ReproduceResult {
  std::string case_name;
  bool ok = false;
  nlohmann::json report;
  std::vector<std::string> files_written;
};

/// Cases: fig1 (tabular trajectories), fig2 / fig3 (averaging, online and
/// averaged blocks), ex_binary (binary-feature condition report), ex_melo
/// (both conditions on the counterexample). Writes
/// <out_dir>/<case>/trajectory_{original,upper,lower}.csv, report.json and
/// optionally plot.svg.
ReproduceResult reproduce(const std::string& case_name, const std::string& out_dir,
                          const ReproduceOptions& options = {});

enum class FuzzKind { Tabular, Averaging, LfaBinary, MeloImpliesNew };

FuzzKind fuzz_kind_from_string(const std::string& name);
std::string fuzz_kind_name(FuzzKind kind);

struct FuzzOptions {
  FuzzKind kind = FuzzKind::Tabular;
  long trials = 100;
  std::uint64_t seed = 0;
  bool with_sandwich = true;  // tabular / averaging / lfa_binary kinds
  double sandwich_t_final = 100.0;
  double sandwich_dt = 1e-3;
  double sandwich_tol = 1e-7;
  bool sandwich_extend_until_settled = false;
  double sandwich_settle_norm = 1e-7;
  double margin_tol = 1e-12;
  int min_states = 2, max_states = 3;
  int min_actions = 2, max_actions = 3;
  double gamma_min = 0.1, gamma_max = 0.95;
  double dist_uniform_mix = 0.0;  // mix of dist with uniform, bounds settle time
  double delta_min = 0.01, delta_max = 10.0;  // averaging coupling draw (log-uniform)
};

struct FuzzSummary {
  std::string kind;
  long trials = 0;
  std::uint64_t seed = 0;
  long violations = 0;
  std::vector<std::string> details;  // serialized violating instances
  long melo_holds_count = 0;         // melo_implies_new only
  // worst sandwich endpoint over all trials, when sandwiches were extended
  double worst_final_norm = 0.0;
};

void to_json(nlohmann::json& j, const FuzzSummary& s);

/// Randomized property checks; deterministic given (kind, trials, seed).
/// Throws std::invalid_argument when trials < 1.
FuzzSummary fuzz(const FuzzOptions& options);

/// Dirichlet transition rows, uniform rewards, random positive sampling
/// distribution (optionally mixed toward uniform), gamma in the given range.
Mdp random_mdp(SplitMix64& rng, int num_states, int num_actions, double gamma_min,
               double gamma_max, double dist_uniform_mix = 0.0);

BehaviorPolicy random_behavior_policy(SplitMix64& rng, int num_states, int num_actions);

/// Partition-based features: disjoint row supports (hence orthogonal,
/// nonnegative), every column nonempty; entries 1 when `binary`, otherwise
/// positive uniform values.
FeatureMatrix random_partition_features(SplitMix64& rng, int pair_count, int num_features,
                                        bool binary);

}  // namespace qode
