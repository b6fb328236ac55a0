#include "lbc/evaluation.hpp"

#include <cmath>

namespace lbc {

Trajectory rollout(const FeatureMdp& mdp, const Policy& policy, Rng& rng) {
  const int horizon = mdp.horizon();
  const auto steps = resolve_episode(policy, horizon, rng);
  Trajectory traj(static_cast<std::size_t>(horizon));
  int x = sample_index(rng, mdp.initial_distribution());
  for (int h = 0; h < horizon; ++h) {
    const int a = act_step(mdp, *steps[h], h, x, rng);
    traj[h] = {x, a, mdp.reward(h, x, a)};
    if (h + 1 < horizon) x = sample_index(rng, mdp.transition_matrix(h, x).row(a));
  }
  return traj;
}

QTable exact_q_star(const FeatureMdp& mdp) {
  const int horizon = mdp.horizon();
  QTable t;
  t.q.resize(horizon);
  t.v.resize(horizon);
  for (int h = horizon - 1; h >= 0; --h) {
    const int s = mdp.num_states(h);
    t.q[h].resize(s, mdp.num_actions());
    t.v[h].resize(s);
    for (int x = 0; x < s; ++x) {
      VectorXd q = mdp.rewards(h, x);
      if (h + 1 < horizon) q += mdp.transition_matrix(h, x) * t.v[h + 1];
      t.q[h].row(x) = q.transpose();
      t.v[h][x] = q.maxCoeff();
    }
  }
  return t;
}

std::vector<std::vector<int>> greedy_actions(const QTable& table) {
  std::vector<std::vector<int>> out(table.q.size());
  for (std::size_t h = 0; h < table.q.size(); ++h)
    for (Eigen::Index x = 0; x < table.q[h].rows(); ++x)
      out[h].push_back(argmax_lowest(table.q[h].row(x).transpose()));
  return out;
}

namespace {

std::vector<MatrixXd> markov_occupancy(const FeatureMdp& mdp, const MarkovComponent& comp,
                                       const ActionLawOptions& options) {
  const int horizon = mdp.horizon();
  std::vector<MatrixXd> occ(static_cast<std::size_t>(horizon));
  VectorXd state_dist = mdp.initial_distribution();
  for (int h = 0; h < horizon; ++h) {
    const int s = mdp.num_states(h);
    occ[h] = MatrixXd::Zero(s, mdp.num_actions());
    for (int x = 0; x < s; ++x) {
      if (state_dist[x] == 0.0) continue;
      occ[h].row(x) = state_dist[x] * action_distribution(mdp, *comp.steps[h], h, x, options).transpose();
    }
    if (h + 1 < horizon) {
      VectorXd next = VectorXd::Zero(mdp.num_states(h + 1));
      for (int x = 0; x < s; ++x) next += mdp.transition_matrix(h, x).transpose() * occ[h].row(x).transpose();
      state_dist = next;
    }
  }
  return occ;
}

}  // namespace

ExactValue policy_value_exact(const FeatureMdp& mdp, const Policy& policy, const ActionLawOptions& options) {
  policy.check_compatible(mdp);
  const int horizon = mdp.horizon();
  ExactValue ev;
  ev.occupancy.resize(horizon);
  for (int h = 0; h < horizon; ++h) ev.occupancy[h] = MatrixXd::Zero(mdp.num_states(h), mdp.num_actions());
  for (const auto& comp : expand_markov(policy, horizon)) {
    const auto occ = markov_occupancy(mdp, comp, options);
    for (int h = 0; h < horizon; ++h) ev.occupancy[h] += comp.weight * occ[h];
  }
  for (int h = 0; h < horizon; ++h)
    for (int x = 0; x < mdp.num_states(h); ++x) ev.value += ev.occupancy[h].row(x).dot(mdp.rewards(h, x));
  return ev;
}

MonteCarloValue policy_value_monte_carlo(const FeatureMdp& mdp, const Policy& policy, int episodes,
                                         std::uint64_t seed) {
  if (episodes < 1) throw Error("policy_value_monte_carlo: episode count must be positive");
  policy.check_compatible(mdp);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < episodes; ++i) {
    Rng rng = make_rng(seed, Stream::kRollout, 0, 0, static_cast<std::uint64_t>(i));
    double ret = 0.0;
    for (const auto& step : rollout(mdp, policy, rng)) ret += step.reward;
    sum += ret;
    sum_sq += ret * ret;
  }
  MonteCarloValue out;
  out.episodes = episodes;
  out.mean = sum / episodes;
  const double var = episodes > 1 ? std::max(0.0, (sum_sq - episodes * out.mean * out.mean) / (episodes - 1)) : 0.0;
  out.std_error = std::sqrt(var / episodes);
  return out;
}

QTable policy_q(const FeatureMdp& mdp, const Policy& policy, const std::vector<VectorXd>& state_bonus,
                const ActionLawOptions& options) {
  policy.check_compatible(mdp);
  const int horizon = mdp.horizon();
  const auto parts = expand_markov(policy, horizon);
  if (parts.size() != 1) throw Error("policy_q: policy must be Markov (no mixture components)");
  if (!state_bonus.empty() && static_cast<int>(state_bonus.size()) != horizon)
    throw Error("policy_q: state bonus must have one entry per step");
  const auto& steps = parts.front().steps;
  QTable t;
  t.q.resize(horizon);
  t.v.resize(horizon);
  for (int h = horizon - 1; h >= 0; --h) {
    const int s = mdp.num_states(h);
    t.q[h].resize(s, mdp.num_actions());
    t.v[h].resize(s);
    VectorXd next;
    if (h + 1 < horizon) {
      next = t.v[h + 1];
      if (!state_bonus.empty()) next += state_bonus[h + 1];
    }
    for (int x = 0; x < s; ++x) {
      VectorXd q = mdp.rewards(h, x);
      if (h + 1 < horizon) q += mdp.transition_matrix(h, x) * next;
      t.q[h].row(x) = q.transpose();
      t.v[h][x] = action_distribution(mdp, *steps[h], h, x, options).dot(q);
    }
  }
  return t;
}

std::vector<double> perf_diff_decompose(const FeatureMdp& mdp, const Policy& pi, const Policy& pi_prime,
                                        const ActionLawOptions& options) {
  const QTable q = policy_q(mdp, pi, {}, options);
  const ExactValue other = policy_value_exact(mdp, pi_prime, options);
  std::vector<double> gaps(static_cast<std::size_t>(mdp.horizon()), 0.0);
  for (int h = 0; h < mdp.horizon(); ++h) {
    const MatrixXd& occ = other.occupancy[h];
    for (int x = 0; x < mdp.num_states(h); ++x)
      for (int a = 0; a < mdp.num_actions(); ++a) gaps[h] += occ(x, a) * (q.v[h][x] - q.q[h](x, a));
  }
  return gaps;
}

double expected_state_value(const ExactValue& ev, int h, const VectorXd& f) {
  return ev.occupancy[h].rowwise().sum().dot(f);
}

}  // namespace lbc
