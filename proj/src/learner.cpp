#include "lbc/learner.hpp"

#include <algorithm>
#include <limits>

#include "lbc/parallel.hpp"

namespace lbc {

RidgeFit ridge_fit(const MatrixXd& features, const VectorXd& labels, double lambda) {
  if (!(lambda > 0.0)) throw Error("ridge_fit: lambda must be positive");
  if (features.rows() != labels.size()) throw Error("ridge_fit: feature and label counts differ");
  const Eigen::Index d = features.cols();
  RidgeFit fit;
  fit.cov = lambda * MatrixXd::Identity(d, d);
  if (features.rows() == 0) {
    fit.weights = VectorXd::Zero(d);
    return fit;
  }
  fit.cov.noalias() += features.transpose() * features;
  const VectorXd rhs = features.transpose() * labels;
  fit.weights = fit.cov.ldlt().solve(rhs);
  return fit;
}

namespace {

std::vector<PolicyPtr> phase_components(const LearnerState& state, int t, int h, const PolicyPtr& partial_greedy) {
  std::vector<PolicyPtr> out;
  if (t == 1) {
    out.push_back(compose_at(make_uniform(), partial_greedy, h + 1));
    return out;
  }
  for (int s = 1; s < t; ++s) {
    const RoundRecord& rec = state.rounds.at(static_cast<std::size_t>(s - 1));
    out.push_back(compose_at(compose_at(rec.greedy, rec.tilde, h), partial_greedy, h + 1));
  }
  return out;
}

}  // namespace

PolicyPtr phase_policy(const LearnerState& state, int t, int h, const PolicyPtr& partial_greedy) {
  auto comps = phase_components(state, t, h, partial_greedy);
  if (comps.size() == 1) return comps.front();
  return make_mixture(std::move(comps));
}

std::vector<PhaseSample> collect_phase(const FeatureMdp& mdp, const LearnerState& state, int t, int h, int n,
                                       const PolicyPtr& partial_greedy, std::uint64_t seed) {
  if (t < 1 || t > state.completed_rounds() + 1) throw Error("collect_phase: round is not the next one");
  const auto comps = phase_components(state, t, h, partial_greedy);
  std::vector<PhaseSample> out(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    Rng rng = make_rng(seed, Stream::kRollout, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(h), i);
    std::size_t k = 0;
    if (comps.size() > 1) k = std::uniform_int_distribution<std::size_t>(0, comps.size() - 1)(rng);
    PhaseSample& s = out[i];
    s.round = t;
    s.index = static_cast<int>(i);
    s.step = h;
    s.source_round = t == 1 ? 0 : static_cast<int>(k) + 1;
    s.trajectory = rollout(mdp, *comps[k], rng);
  });
  return out;
}

void psdp_ucb_round(const FeatureMdp& mdp, LearnerState& state, const ParamSet& params,
                    const LearnerOptions& options) {
  const int horizon = mdp.horizon();
  const int d = mdp.dim();
  const int t = state.completed_rounds() + 1;
  const int n = options.samples;
  if (n < 1) throw Error("psdp_ucb_round: sample count must be positive");

  RoundRecord rec;
  rec.round = t;
  rec.w_hat.assign(horizon, VectorXd::Zero(d));
  rec.cov.resize(horizon);
  rec.bonus.resize(horizon);
  rec.bonus_values.resize(horizon);
  rec.data_states.resize(horizon);
  rec.data_actions.resize(horizon);
  std::vector<MatrixXd> tilde_covs(static_cast<std::size_t>(horizon), MatrixXd::Zero(d, d));

  for (int h = horizon - 1; h >= 0; --h) {
    const PolicyPtr partial = make_greedy(rec.w_hat);
    auto samples = collect_phase(mdp, state, t, h, n, partial, options.seed);

    MatrixXd x(n, d);
    VectorXd y(n);
    auto& states = rec.data_states[h];
    auto& actions = rec.data_actions[h];
    states.resize(n);
    actions.resize(n);
    for (int i = 0; i < n; ++i) {
      const Trajectory& traj = samples[i].trajectory;
      const auto& step = traj[h];
      x.row(i) = mdp.action_features(h, step.state).row(step.action);
      double label = step.reward;
      for (int g = h + 1; g < horizon; ++g) label += traj[g].reward + rec.bonus_values[g][traj[g].state];
      y[i] = label;
      states[i] = step.state;
      actions[i] = step.action;
    }
    RidgeFit fit = ridge_fit(x, y, params.lambda);
    rec.w_hat[h] = fit.weights;
    if (options.constant_bonus) {
      rec.bonus[h] = FrozenBonus::constant(h, covariance_pair(fit.cov, params), *options.constant_bonus);
    } else {
      Rng brng = make_rng(options.seed, Stream::kBonus, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(h));
      rec.bonus[h] = make_bonus(fit.cov, params, h, brng);
    }
    rec.cov[h] = std::move(fit.cov);
    rec.bonus_values[h] = rec.bonus[h].eval_states(mdp);
    tilde_covs[h] = rec.bonus[h].pair().sigma;
    if (options.keep_trajectories)
      for (auto& s : samples) state.log.push_back(std::move(s));
  }
  rec.greedy = make_greedy(rec.w_hat);
  rec.tilde = make_tilde(std::move(tilde_covs));
  state.rounds.push_back(std::move(rec));
}

QTable exact_q_round(const FeatureMdp& mdp, const RoundRecord& record) {
  return policy_q(mdp, *record.greedy, record.bonus_values);
}

std::vector<LeastSquaresFit> fit_q_round(const FeatureMdp& mdp, const QTable& q) {
  std::vector<LeastSquaresFit> fits;
  for (int h = 0; h < mdp.horizon(); ++h) {
    const MatrixXd& table = q.q[h];
    VectorXd targets(table.size());
    for (Eigen::Index x = 0; x < table.rows(); ++x)
      for (Eigen::Index a = 0; a < table.cols(); ++a) targets[x * table.cols() + a] = table(x, a);
    fits.push_back(least_squares(mdp.step_design(h), targets));
  }
  return fits;
}

RoundDiagnostics round_diagnostics(const FeatureMdp& mdp, const RoundRecord& record, double optimal_value,
                                   double previous_value_sum) {
  RoundDiagnostics diag;
  diag.round = record.round;
  const ExactValue ev = policy_value_exact(mdp, *record.greedy);
  diag.value = ev.value;
  diag.suboptimality = optimal_value - ev.value;
  diag.value_mixture = (previous_value_sum + ev.value) / record.round;
  double bonus_sum = 0.0;
  diag.max_bonus = -std::numeric_limits<double>::infinity();
  for (int h = 0; h < mdp.horizon(); ++h) {
    bonus_sum += expected_state_value(ev, h, record.bonus_values[h]);
    diag.max_bonus = std::max(diag.max_bonus, record.bonus_values[h].maxCoeff());
  }
  diag.mean_bonus_per_step = bonus_sum / mdp.horizon();
  for (const auto& fit : fit_q_round(mdp, exact_q_round(mdp, record)))
    diag.regression_residual_max = std::max(diag.regression_residual_max, fit.max_abs_residual);
  return diag;
}

LearnerOutput run_psdp_ucb(const FeatureMdp& mdp, const ParamSet& params, const LearnerOptions& options,
                           LearnerState* state) {
  if (options.rounds < 1 || options.samples < 1) throw Error("run_psdp_ucb: T and n must be positive");
  LearnerState local;
  LearnerState& st = state ? *state : local;
  while (st.completed_rounds() < options.rounds) {
    psdp_ucb_round(mdp, st, params, options);
    if (options.on_round) options.on_round(st);
  }

  LearnerOutput out;
  const QTable star = exact_q_star(mdp);
  out.optimal_value = mdp.initial_distribution().dot(star.v[0]);
  double value_sum = 0.0;
  for (int t = 0; t < options.rounds; ++t) {
    const RoundRecord& rec = st.rounds[static_cast<std::size_t>(t)];
    RoundDiagnostics diag = round_diagnostics(mdp, rec, out.optimal_value, value_sum);
    value_sum += diag.value;
    out.policies.push_back(rec.greedy);
    out.diagnostics.push_back(diag);
  }
  out.mixture = make_mixture(out.policies);
  out.mixture_value = value_sum / options.rounds;
  out.mixture_suboptimality = out.optimal_value - out.mixture_value;
  return out;
}

nlohmann::json checkpoint_to_json(const LearnerState& state) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& rec : state.rounds) {
    nlohmann::json r;
    r["round"] = rec.round;
    nlohmann::json w = nlohmann::json::array(), cov = nlohmann::json::array(), bonus = nlohmann::json::array();
    for (std::size_t h = 0; h < rec.w_hat.size(); ++h) {
      w.push_back(vector_to_json(rec.w_hat[h]));
      cov.push_back(matrix_to_json(rec.cov[h]));
      bonus.push_back(rec.bonus[h].to_json());
    }
    r["w_hat"] = std::move(w);
    r["cov"] = std::move(cov);
    r["bonus"] = std::move(bonus);
    rounds.push_back(std::move(r));
  }
  nlohmann::json j;
  j["rounds"] = std::move(rounds);
  return j;
}

LearnerState checkpoint_from_json(const FeatureMdp& mdp, const nlohmann::json& j) {
  LearnerState state;
  try {
    for (const auto& r : j.at("rounds")) {
      RoundRecord rec;
      rec.round = r.at("round").get<int>();
      if (rec.round != state.completed_rounds() + 1) throw Error("checkpoint: rounds are not consecutive");
      const auto& w = r.at("w_hat");
      if (static_cast<int>(w.size()) != mdp.horizon()) throw Error("checkpoint: wrong number of steps");
      std::vector<MatrixXd> tilde;
      for (int h = 0; h < mdp.horizon(); ++h) {
        rec.w_hat.push_back(vector_from_json(w[h]));
        rec.cov.push_back(matrix_from_json(r.at("cov")[h]));
        rec.bonus.push_back(FrozenBonus::from_json(r.at("bonus")[h]));
        rec.bonus_values.push_back(rec.bonus.back().eval_states(mdp));
        tilde.push_back(rec.bonus.back().pair().sigma);
        if (rec.w_hat.back().size() != mdp.dim()) throw Error("checkpoint: weight dimension mismatch");
      }
      rec.data_states.resize(mdp.horizon());
      rec.data_actions.resize(mdp.horizon());
      rec.greedy = make_greedy(rec.w_hat);
      rec.tilde = make_tilde(std::move(tilde));
      state.rounds.push_back(std::move(rec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("checkpoint: ") + e.what());
  }
  return state;
}

}  // namespace lbc
