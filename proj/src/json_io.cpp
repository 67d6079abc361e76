#include "qode/json_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace qode {

namespace {

using nlohmann::json;

Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw std::invalid_argument(what + " must be an array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Matrix M(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (j[r].size() != cols) throw std::invalid_argument(what + " has ragged rows");
    for (std::size_t c = 0; c < cols; ++c) M(r, c) = j[r][c].get<double>();
  }
  return M;
}

json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Vector vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw std::invalid_argument(what + " must be an array");
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

const json& require_field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw std::invalid_argument(std::string("missing field '") + name + "'");
  return *it;
}

}  // namespace

Mdp mdp_from_json(const nlohmann::json& j) {
  Mdp mdp;
  mdp.num_states = require_field(j, "num_states").get<int>();
  mdp.num_actions = require_field(j, "num_actions").get<int>();
  mdp.gamma = require_field(j, "gamma").get<double>();
  for (const auto& P : require_field(j, "transitions"))
    mdp.transitions.push_back(matrix_from_json(P, "transition matrix"));
  for (const auto& R : require_field(j, "rewards"))
    mdp.rewards.push_back(vector_from_json(R, "reward vector"));

  const json& dist = require_field(j, "dist");
  if (dist.is_object()) {
    BehaviorPolicy beta;
    beta.probs = matrix_from_json(require_field(dist, "behavior_policy"), "behavior_policy");
    for (Eigen::Index s = 0; s < beta.probs.rows(); ++s) {
      const double sum = beta.probs.row(s).sum();
      if (std::abs(sum - 1.0) > 1e-12 || beta.probs.row(s).minCoeff() < 0.0)
        throw std::invalid_argument("behavior_policy row " + std::to_string(s) +
                                    " is not a distribution");
    }
    mdp.dist = stationary_state_action_distribution(mdp.transitions, beta);
  } else {
    mdp.dist = vector_from_json(dist, "dist");
  }
  require_valid(mdp);
  return mdp;
}

nlohmann::json to_json_mdp(const Mdp& mdp) {
  json j;
  j["num_states"] = mdp.num_states;
  j["num_actions"] = mdp.num_actions;
  j["gamma"] = mdp.gamma;
  j["transitions"] = json::array();
  for (const auto& P : mdp.transitions) j["transitions"].push_back(matrix_to_json(P));
  j["rewards"] = json::array();
  for (const auto& R : mdp.rewards) j["rewards"].push_back(vector_to_json(R));
  j["dist"] = vector_to_json(mdp.dist);
  return j;
}

Mdp load_mdp(const std::string& path) { return mdp_from_json(read_json_file(path)); }

FeatureMatrix features_from_json(const nlohmann::json& j) {
  const int rows = require_field(j, "rows").get<int>();
  const int cols = require_field(j, "cols").get<int>();
  const json& values = require_field(j, "values");
  if ((int)values.size() != rows * cols)
    throw std::invalid_argument("feature values length " + std::to_string(values.size()) +
                                " does not match rows*cols");
  Matrix F(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) F(r, c) = values[r * cols + c].get<double>();
  return FeatureMatrix::create(std::move(F));
}

nlohmann::json to_json_features(const FeatureMatrix& phi) {
  json j;
  j["rows"] = phi.values.rows();
  j["cols"] = phi.values.cols();
  json values = json::array();
  for (Eigen::Index r = 0; r < phi.values.rows(); ++r)
    for (Eigen::Index c = 0; c < phi.values.cols(); ++c) values.push_back(phi.values(r, c));
  j["values"] = std::move(values);
  return j;
}

FeatureMatrix load_features(const std::string& path) {
  return features_from_json(read_json_file(path));
}

nlohmann::json to_json_report(const StabilityReport& report) {
  json j;
  j["verdict"] = report.holds ? "holds" : "fails";
  j["worst_margin"] = report.worst_margin;
  j["transform"] = report.transform;
  j["per_mode"] = json::array();
  for (const auto& mode : report.per_mode) {
    json m;
    json policy = json::array();
    for (int a : mode.policy.actions) policy.push_back(a + 1);  // 1-based in reports
    m["policy"] = std::move(policy);
    m["margins"] = vector_to_json(mode.margins);
    if (mode.diagonal_terms.size() > 0) {
      m["diag"] = vector_to_json(mode.diagonal_terms);
      m["offdiag"] = vector_to_json(mode.off_diagonal_sums);
    }
    j["per_mode"].push_back(std::move(m));
  }
  return j;
}

nlohmann::json to_json_run(const RunRecord& record) {
  json j;
  j["seed"] = record.seed;
  j["algorithm"] = record.algorithm;
  j["iterations"] = record.iterations;
  j["log"] = json::array();
  for (std::size_t i = 0; i < record.log_iterations.size(); ++i)
    j["log"].push_back(json{{"k", record.log_iterations[i]}, {"error", record.log_errors[i]}});
  j["final"] = vector_to_json(record.final_iterate);
  return j;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          Eigen::Index col_start, Eigen::Index col_count) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot write " + path);
  const Eigen::Index dim = traj.states.empty() ? 0 : traj.states.front().size();
  const Eigen::Index count = col_count < 0 ? dim - col_start : col_count;
  std::fprintf(f, "t");
  for (Eigen::Index c = 0; c < count; ++c) std::fprintf(f, ",x_%ld", (long)c);
  std::fprintf(f, ",mode\n");
  for (std::size_t row = 0; row < traj.times.size(); ++row) {
    std::fprintf(f, "%.17g", traj.times[row]);
    for (Eigen::Index c = 0; c < count; ++c)
      std::fprintf(f, ",%.17g", traj.states[row](col_start + c));
    std::fprintf(f, ",%d\n", traj.modes[row]);
  }
  std::fclose(f);
}

void write_trajectory_svg(const std::string& path, const std::vector<SvgSeries>& series,
                          Eigen::Index col_start, Eigen::Index col_count) {
  const int width = 900, height = 560, margin = 50;
  double t_max = 1e-12, y_min = 0.0, y_max = 0.0;
  for (const auto& s : series) {
    if (!s.traj || s.traj->times.empty()) continue;
    t_max = std::max(t_max, s.traj->times.back());
    const Eigen::Index dim = s.traj->states.front().size();
    const Eigen::Index count = col_count < 0 ? dim - col_start : col_count;
    for (const auto& x : s.traj->states)
      for (Eigen::Index c = 0; c < count; ++c) {
        y_min = std::min(y_min, x(col_start + c));
        y_max = std::max(y_max, x(col_start + c));
      }
  }
  if (y_max <= y_min) y_max = y_min + 1.0;

  auto px = [&](double t) { return margin + t / t_max * (width - 2 * margin); };
  auto py = [&](double y) {
    return height - margin - (y - y_min) / (y_max - y_min) * (height - 2 * margin);
  };

  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot write " + path);
  std::fprintf(f,
               "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
               "viewBox=\"0 0 %d %d\">\n",
               width, height, width, height);
  std::fprintf(f, "<rect width=\"%d\" height=\"%d\" fill=\"white\"/>\n", width, height);
  std::fprintf(f,
               "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"#888\"/>\n"
               "<line x1=\"%d\" y1=\"%.1f\" x2=\"%d\" y2=\"%.1f\" stroke=\"#888\"/>\n",
               margin, height - margin, width - margin, height - margin, margin, py(0.0),
               width - margin, py(0.0));
  for (const auto& s : series) {
    if (!s.traj || s.traj->times.empty()) continue;
    const std::size_t rows = s.traj->times.size();
    const std::size_t stride = std::max<std::size_t>(1, rows / 1500);
    const Eigen::Index dim = s.traj->states.front().size();
    const Eigen::Index count = col_count < 0 ? dim - col_start : col_count;
    for (Eigen::Index c = 0; c < count; ++c) {
      std::fprintf(f, "<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"1\" points=\"",
                   s.color.c_str());
      for (std::size_t row = 0; row < rows; row += stride)
        std::fprintf(f, "%.1f,%.1f ", px(s.traj->times[row]),
                     py(s.traj->states[row](col_start + c)));
      std::fprintf(f, "%.1f,%.1f\"/>\n", px(s.traj->times.back()),
                   py(s.traj->states.back()(col_start + c)));
    }
  }
  double ly = margin;
  for (const auto& s : series) {
    std::fprintf(f,
                 "<text x=\"%d\" y=\"%.1f\" fill=\"%s\" font-family=\"sans-serif\" "
                 "font-size=\"14\">%s</text>\n",
                 width - margin - 90, ly, s.color.c_str(), s.label.c_str());
    ly += 18;
  }
  std::fprintf(f, "</svg>\n");
  std::fclose(f);
}

}  // namespace qode
