#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lbc/bonus.hpp"
#include "lbc/evaluation.hpp"
#include "lbc/mdp.hpp"
#include "lbc/policy.hpp"

namespace lbc {

struct RidgeFit {
  VectorXd weights;
  MatrixXd cov;  // lambda I + sum phi phi^T
};

/// Ridge regression through the regularized normal equations, solved with
/// an LDL^T factorization. `features` holds one sample per row.
RidgeFit ridge_fit(const MatrixXd& features, const VectorXd& labels, double lambda);

/// One logged rollout with its provenance. `source_round` is the mixture
/// component s that was drawn (0 when the uniform bootstrap was used).
struct PhaseSample {
  int round = 0;
  int index = 0;
  int step = 0;
  int source_round = 0;
  Trajectory trajectory;
};

/// Everything produced by one round t (all per-step vectors are indexed by
/// the 0-based step h).
struct RoundRecord {
  int round = 0;
  std::vector<VectorXd> w_hat;
  std::vector<MatrixXd> cov;
  std::vector<FrozenBonus> bonus;
  /// bonus[h] evaluated at every step-h state.
  std::vector<VectorXd> bonus_values;
  /// Step-h (state, action) pairs of the phase (t, h) dataset.
  std::vector<std::vector<int>> data_states;
  std::vector<std::vector<int>> data_actions;
  PolicyPtr greedy;
  PolicyPtr tilde;
};

struct LearnerState {
  std::vector<RoundRecord> rounds;
  std::vector<PhaseSample> log;
  int completed_rounds() const { return static_cast<int>(rounds.size()); }
};

struct LearnerOptions {
  int rounds = 1;
  int samples = 1;
  std::uint64_t seed = 0;
  /// Keep every trajectory in LearnerState::log.
  bool keep_trajectories = false;
  /// Replace every bonus by this constant (sanity control for the optimism check).
  std::optional<double> constant_bonus;
  /// Called after each completed round (e.g. to write a checkpoint).
  std::function<void(const LearnerState&)> on_round;
};

/// Per-round diagnostics; `round` is 1-based.
struct RoundDiagnostics {
  int round = 0;
  double suboptimality = 0.0;
  double value = 0.0;
  double value_mixture = 0.0;
  double mean_bonus_per_step = 0.0;
  double max_bonus = 0.0;
  double regression_residual_max = 0.0;
};

struct LearnerOutput {
  std::vector<PolicyPtr> policies;
  PolicyPtr mixture;
  std::vector<RoundDiagnostics> diagnostics;
  double optimal_value = 0.0;
  double mixture_value = 0.0;
  double mixture_suboptimality = 0.0;
};

/// The sampling policy of phase (t, h), t 1-based: the uniform mixture over
/// s < t of pi_hat^s o_h pi_tilde^s o_{h+1} pi_hat^t, or the uniform
/// random policy up to step h followed by pi_hat^t when t = 1.
/// `partial_greedy` must hold pi_hat^t for the steps after h.
PolicyPtr phase_policy(const LearnerState& state, int t, int h, const PolicyPtr& partial_greedy);

/// Draws the n rollouts of phase (t, h). Rollout i uses the derived stream
/// (seed, rollout, t, h, i) and rollouts run in parallel.
std::vector<PhaseSample> collect_phase(const FeatureMdp& mdp, const LearnerState& state, int t, int h, int n,
                                       const PolicyPtr& partial_greedy, std::uint64_t seed);

/// Runs round t = state.completed_rounds() + 1 and appends its record.
void psdp_ucb_round(const FeatureMdp& mdp, LearnerState& state, const ParamSet& params,
                    const LearnerOptions& options);

/// Exact Q_h^t: the Q-function of pi_hat^t under rewards r + F^t, where
/// bonuses are collected at steps after h.
QTable exact_q_round(const FeatureMdp& mdp, const RoundRecord& record);

/// Least-squares fits of exact Q_h^t on the step-h features, one per step.
std::vector<LeastSquaresFit> fit_q_round(const FeatureMdp& mdp, const QTable& q);

/// Diagnostics of one completed round given the optimal value and the
/// running sum of earlier round values.
RoundDiagnostics round_diagnostics(const FeatureMdp& mdp, const RoundRecord& record, double optimal_value,
                                   double previous_value_sum);

/// Runs all rounds (resuming from `state` if it already holds some) and
/// evaluates every round policy and the final uniform mixture exactly.
LearnerOutput run_psdp_ucb(const FeatureMdp& mdp, const ParamSet& params, const LearnerOptions& options,
                           LearnerState* state = nullptr);

/// Checkpoint: per-round w_hat, covariances and frozen bonuses (datasets and
/// trajectories are not stored). Loading rebuilds the round policies.
nlohmann::json checkpoint_to_json(const LearnerState& state);
LearnerState checkpoint_from_json(const FeatureMdp& mdp, const nlohmann::json& j);

}  // namespace lbc
