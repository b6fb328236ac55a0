#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lbc/linalg.hpp"

namespace lbc {

/// Steps are 0-based in the API: h = 0 .. horizon-1.
struct MdpValidation {
  /// Assumption that every feature (and reward parameter) lies in the unit
  /// ball. Disabled only for the raw-scale counterexamples.
  bool require_unit_features = true;
  double stochastic_tol = 1e-12;
  double norm_tol = 1e-12;
};

/// Layered finite-horizon MDP with per-step linear features and linear rewards.
///
/// features[h][x] is an A x d matrix whose row a is phi_h(x, a).
/// transitions[h][x] is an A x S_{h+1} matrix whose row a is P_h(. | x, a);
/// it exists only for h < H-1. Rewards are r_h(x,a) = <phi_h(x,a), theta_h>.
/// Immutable after construction; the constructor validates every invariant and
/// throws lbc::Error naming the first violation.
class FeatureMdp {
 public:
  FeatureMdp(int horizon, int num_actions, int dim, std::vector<int> states,
             std::vector<std::vector<MatrixXd>> features,
             std::vector<std::vector<MatrixXd>> transitions,
             std::vector<VectorXd> reward_params, VectorXd initial, double norm_bound,
             MdpValidation validation = {});

  int horizon() const { return horizon_; }
  int num_actions() const { return num_actions_; }
  int dim() const { return dim_; }
  int num_states(int h) const { return states_.at(static_cast<std::size_t>(h)); }
  const std::vector<int>& states() const { return states_; }
  double norm_bound() const { return norm_bound_; }
  bool unit_features() const { return validation_.require_unit_features; }

  /// A x d matrix of the action features at (h, x).
  const MatrixXd& action_features(int h, int x) const { return features_[h][x]; }
  VectorXd feature(int h, int x, int a) const { return features_[h][x].row(a).transpose(); }
  /// A x S_{h+1}; valid for h < horizon-1.
  const MatrixXd& transition_matrix(int h, int x) const { return transitions_[h][x]; }
  const VectorXd& reward_params(int h) const { return reward_params_[h]; }
  const VectorXd& initial_distribution() const { return initial_; }

  double reward(int h, int x, int a) const { return features_[h][x].row(a).dot(reward_params_[h]); }
  /// Rewards of every action at (h, x).
  VectorXd rewards(int h, int x) const { return features_[h][x] * reward_params_[h]; }

  /// All (x, a) features of step h stacked as rows, ordered x-major: row x*A + a.
  MatrixXd step_design(int h) const;

  const std::vector<std::vector<MatrixXd>>& all_features() const { return features_; }
  const std::vector<std::vector<MatrixXd>>& all_transitions() const { return transitions_; }
  const std::vector<VectorXd>& all_reward_params() const { return reward_params_; }

 private:
  void validate() const;

  int horizon_;
  int num_actions_;
  int dim_;
  std::vector<int> states_;
  std::vector<std::vector<MatrixXd>> features_;
  std::vector<std::vector<MatrixXd>> transitions_;
  std::vector<VectorXd> reward_params_;
  VectorXd initial_;
  double norm_bound_;
  MdpValidation validation_;
};

struct TrajectoryStep {
  int state = 0;
  int action = 0;
  double reward = 0.0;
};

/// Exactly `horizon` steps.
using Trajectory = std::vector<TrajectoryStep>;

/// q[h] is S_h x A, v[h] has length S_h.
struct QTable {
  std::vector<MatrixXd> q;
  std::vector<VectorXd> v;
};

/// MDP file format (canonical JSON):
///   {"H", "A", "d", "S": [S_1..S_H], "phi": [h][x][a][k], "P": [h][x][a][x'] for
///    h < H-1, "theta_r": [h][k], "d1": [x], "B": number, "unit_features": bool (optional)}
nlohmann::json mdp_to_json(const FeatureMdp& mdp);
/// Validates every invariant; throws lbc::Error naming the first violation.
FeatureMdp mdp_from_json(const nlohmann::json& j);
FeatureMdp load_mdp(const std::string& path);
void save_mdp(const FeatureMdp& mdp, const std::string& path);

}  // namespace lbc
