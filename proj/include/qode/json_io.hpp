#pragma once

#include "qode/linear_fa.hpp"
#include "qode/mdp.hpp"
#include "qode/qlearn.hpp"
#include "qode/stability.hpp"
#include "qode/switching.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace qode {

/// MDP schema:
/// {"num_states", "num_actions", "gamma",
///  "transitions": [per-action |S|x|S| matrix],
///  "rewards": [per-action length-|S| vector],
///  "dist": explicit length-|S||A| vector | {"behavior_policy": |S|x|A| matrix}}
/// With "behavior_policy", dist is the stationary state-action distribution.
/// Throws std::invalid_argument on malformed input or broken invariants.
Mdp mdp_from_json(const nlohmann::json& j);
nlohmann::json to_json_mdp(const Mdp& mdp);
Mdp load_mdp(const std::string& path);

/// Feature schema: {"rows", "cols", "values": row-major array}.
FeatureMatrix features_from_json(const nlohmann::json& j);
nlohmann::json to_json_features(const FeatureMatrix& phi);
FeatureMatrix load_features(const std::string& path);

/// {"verdict", "worst_margin", "transform", "per_mode": [{"policy" (1-based),
///  "margins", "diag", "offdiag"}]}
nlohmann::json to_json_report(const StabilityReport& report);

/// {"seed", "algorithm", "iterations", "log": [{"k", "error"}], "final": [...]}
nlohmann::json to_json_run(const RunRecord& record);

void write_json_file(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::string& path);

/// Header `t,x_0,...,x_{n-1},mode`, one row per recorded step; a column
/// window selects a block of the state.
void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          Eigen::Index col_start = 0, Eigen::Index col_count = -1);

struct SvgSeries {
  std::string label;
  std::string color;
  const Trajectory* traj = nullptr;
};

/// Simple line chart of the selected state components over time.
void write_trajectory_svg(const std::string& path, const std::vector<SvgSeries>& series,
                          Eigen::Index col_start = 0, Eigen::Index col_count = -1);

}  // namespace qode
