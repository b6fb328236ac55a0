#pragma once

#include <cstdint>
#include <vector>

#include "lbc/mdp.hpp"
#include "lbc/policy.hpp"

namespace lbc {

/// Samples one episode. Mixture components are drawn first, then
/// x_1 ~ d_1 and for each step an action followed by the next state.
Trajectory rollout(const FeatureMdp& mdp, const Policy& policy, Rng& rng);

/// Optimal Q and V by backward induction.
QTable exact_q_star(const FeatureMdp& mdp);

/// Greedy policy on an exact Q table, expressed per-state (not linear).
/// Lowest-index argmax at every (h, x).
std::vector<std::vector<int>> greedy_actions(const QTable& table);

struct ExactValue {
  double value = 0.0;
  /// occupancy[h] is S_h x A: probability of visiting (x, a) at step h.
  std::vector<MatrixXd> occupancy;
};

/// Exact expected return via forward occupancy propagation. Mixtures are
/// expanded into their weighted Markov components.
ExactValue policy_value_exact(const FeatureMdp& mdp, const Policy& policy, const ActionLawOptions& options = {});

struct MonteCarloValue {
  double mean = 0.0;
  double std_error = 0.0;
  int episodes = 0;
};

/// Sample mean over `episodes` independent rollouts; episode i uses the
/// derived stream (seed, rollout, 0, 0, i).
MonteCarloValue policy_value_monte_carlo(const FeatureMdp& mdp, const Policy& policy, int episodes,
                                         std::uint64_t seed);

/// Q and V of a Markov policy (no mixture nodes) under rewards
/// r_h(x, a) + state_bonus[h](x) collected on arrival at steps h >= 1.
/// `state_bonus` may be empty (no bonus); when present it has one vector per
/// step and entry 0 is ignored, so Q_h includes bonuses of steps h+1..H only.
QTable policy_q(const FeatureMdp& mdp, const Policy& policy, const std::vector<VectorXd>& state_bonus = {},
                const ActionLawOptions& options = {});

/// g_h = E^{pi'}[V_h^pi(x_h) - Q_h^pi(x_h, a_h)]. `pi` must be Markov;
/// `pi_prime` may be any policy. The entries sum to value(pi) - value(pi').
std::vector<double> perf_diff_decompose(const FeatureMdp& mdp, const Policy& pi, const Policy& pi_prime,
                                        const ActionLawOptions& options = {});

/// Occupancy-weighted average of a per-state function at step h.
double expected_state_value(const ExactValue& ev, int h, const VectorXd& f);

}  // namespace lbc
