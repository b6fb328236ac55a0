#pragma once

#include <cmath>
#include <vector>

#include "lbc/mdp.hpp"

namespace lbc::testing {

/// One state per step, every action has feature `phi[a]` (d = 1), rewards
/// r_h = theta[h] * phi, and the chain moves deterministically forward.
inline FeatureMdp chain_mdp(const std::vector<double>& theta, const std::vector<double>& phi = {1.0}) {
  const int horizon = static_cast<int>(theta.size());
  const int num_actions = static_cast<int>(phi.size());
  std::vector<std::vector<MatrixXd>> features(horizon), transitions(horizon - 1);
  std::vector<VectorXd> rewards;
  MatrixXd f(num_actions, 1);
  for (int a = 0; a < num_actions; ++a) f(a, 0) = phi[static_cast<std::size_t>(a)];
  for (int h = 0; h < horizon; ++h) {
    features[h] = {f};
    rewards.push_back(VectorXd::Constant(1, theta[static_cast<std::size_t>(h)]));
    if (h + 1 < horizon) transitions[h] = {MatrixXd::Ones(num_actions, 1)};
  }
  return FeatureMdp(horizon, num_actions, 1, std::vector<int>(horizon, 1), features, transitions, rewards,
                    VectorXd::Ones(1), 1.0 / f.cwiseAbs().maxCoeff());
}

/// Single step, single state, action features given as rows.
inline FeatureMdp bandit_mdp(const MatrixXd& rows) {
  return FeatureMdp(1, static_cast<int>(rows.rows()), static_cast<int>(rows.cols()), {1}, {{rows}}, {},
                    {VectorXd::Zero(rows.cols())}, VectorXd::Ones(1), 1.0, MdpValidation{});
}

/// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Binomial standard error of an empirical frequency.
inline double freq_se(double p, long n) { return std::sqrt(p * (1.0 - p) / static_cast<double>(n)); }

}  // namespace lbc::testing
