#include <doctest.h>

#include "lbc/envs.hpp"
#include "lbc/learner.hpp"
#include "support.hpp"

using namespace lbc;
using lbc::testing::chain_mdp;

namespace {

void check_same_output(const LearnerOutput& a, const LearnerOutput& b) {
  REQUIRE(a.diagnostics.size() == b.diagnostics.size());
  for (std::size_t i = 0; i < a.diagnostics.size(); ++i) {
    CHECK(a.diagnostics[i].suboptimality == b.diagnostics[i].suboptimality);
    CHECK(a.diagnostics[i].value_mixture == b.diagnostics[i].value_mixture);
    CHECK(a.diagnostics[i].mean_bonus_per_step == b.diagnostics[i].mean_bonus_per_step);
    CHECK(a.diagnostics[i].max_bonus == b.diagnostics[i].max_bonus);
  }
  CHECK(a.mixture_value == b.mixture_value);
}

}  // namespace

TEST_CASE("single-action chain is solved in every round") {
  const FeatureMdp mdp = chain_mdp({0.3, 0.7, 0.1});
  const ParamSet params = practical_params(1, 1, 3, mdp.norm_bound(), 3, 20);
  const LearnerOutput out = run_psdp_ucb(mdp, params, {.rounds = 3, .samples = 20, .seed = 0});
  for (const auto& d : out.diagnostics) CHECK(d.suboptimality == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(out.optimal_value == doctest::Approx(1.1));
}

TEST_CASE("zero-reward example has zero suboptimality") {
  const FeatureMdp mdp = make_lsvi_counterexample();
  const ParamSet params = practical_params(1, 2, 2, mdp.norm_bound(), 4, 30);
  const LearnerOutput out = run_psdp_ucb(mdp, params, {.rounds = 4, .samples = 30, .seed = 1});
  for (const auto& d : out.diagnostics) CHECK(d.suboptimality == 0.0);
  CHECK(out.mixture_suboptimality == 0.0);
}

TEST_CASE("zero labels give zero regression weights") {
  const FeatureMdp mdp = make_lsvi_counterexample();
  const ParamSet params = practical_params(1, 2, 2, mdp.norm_bound(), 2, 10);
  LearnerState state;
  LearnerOptions opt{.rounds = 2, .samples = 10, .seed = 0};
  opt.constant_bonus = 0.0;
  run_psdp_ucb(mdp, params, opt, &state);
  for (const auto& r : state.rounds)
    for (const auto& w : r.w_hat) CHECK(w.norm() == 0.0);
}

TEST_CASE("first round samples uniformly up to the phase step") {
  const PolicyPtr greedy = make_greedy({VectorXd::Ones(2), VectorXd::Ones(2), VectorXd::Ones(2)});
  const LearnerState empty;
  const PolicyPtr p = phase_policy(empty, 1, 2, greedy);
  const ComposedPolicy* c = p->get_if<ComposedPolicy>();
  REQUIRE(c != nullptr);
  CHECK(c->prefix->get_if<UniformRandomPolicy>() != nullptr);
  CHECK(c->switch_step == 3);
  CHECK(c->suffix == greedy);
}

TEST_CASE("second round at the last step explores with the first-round pair") {
  const FeatureMdp mdp = make_random_linear_mdp(2, 3, 3, 4, 0);
  const ParamSet params = practical_params(2, 3, 3, mdp.norm_bound(), 1, 20);
  LearnerState state;
  run_psdp_ucb(mdp, params, {.rounds = 1, .samples = 20, .seed = 0}, &state);
  const PolicyPtr tail = make_greedy({VectorXd::Zero(2), VectorXd::Zero(2), VectorXd::Zero(2)});
  const PolicyPtr p = phase_policy(state, 2, 2, tail);
  const ComposedPolicy* outer = p->get_if<ComposedPolicy>();
  REQUIRE(outer != nullptr);
  const ComposedPolicy* inner = outer->prefix->get_if<ComposedPolicy>();
  REQUIRE(inner != nullptr);
  CHECK(inner->switch_step == 2);
  CHECK(inner->prefix == state.rounds[0].greedy);
  CHECK(inner->suffix == state.rounds[0].tilde);
}

TEST_CASE("round datasets have n samples at every step") {
  const FeatureMdp mdp = make_random_linear_mdp(4, 2, 3, 8, 0);
  const ParamSet params = practical_params(4, 2, 3, mdp.norm_bound(), 3, 40);
  LearnerState state;
  run_psdp_ucb(mdp, params, {.rounds = 3, .samples = 40, .seed = 0, .keep_trajectories = true}, &state);
  REQUIRE(state.completed_rounds() == 3);
  for (const auto& r : state.rounds) {
    REQUIRE(r.data_states.size() == 3);
    for (const auto& s : r.data_states) CHECK(s.size() == 40);
    for (int h = 0; h < 3; ++h) CHECK(min_eigenvalue(r.cov[h]) >= params.lambda - 1e-12);
  }
  CHECK(state.log.size() == 3u * 3u * 40u);
}

TEST_CASE("learner is deterministic and resumes bit-identically from a checkpoint") {
  const FeatureMdp mdp = make_random_linear_mdp(4, 2, 3, 8, 0);
  const ParamSet params = practical_params(4, 2, 3, mdp.norm_bound(), 5, 60);
  const LearnerOptions full{.rounds = 5, .samples = 60, .seed = 3};
  const LearnerOutput a = run_psdp_ucb(mdp, params, full);
  const LearnerOutput b = run_psdp_ucb(mdp, params, full);
  check_same_output(a, b);

  LearnerState partial;
  run_psdp_ucb(mdp, params, {.rounds = 2, .samples = 60, .seed = 3}, &partial);
  const std::string saved = checkpoint_to_json(partial).dump();
  LearnerState resumed = checkpoint_from_json(mdp, nlohmann::json::parse(saved));
  CHECK(resumed.completed_rounds() == 2);
  const LearnerOutput c = run_psdp_ucb(mdp, params, full, &resumed);
  check_same_output(a, c);
}

TEST_CASE("exact round Q is linear on a Bellman-complete env") {
  const FeatureMdp mdp = make_random_linear_mdp(4, 2, 3, 8, 0);
  PracticalOptions opt;
  opt.explored_threshold = 64.0;
  const ParamSet params = practical_params(4, 2, 3, mdp.norm_bound(), 3, 200, opt);
  LearnerState state;
  run_psdp_ucb(mdp, params, {.rounds = 3, .samples = 200, .seed = 0}, &state);
  for (const auto& r : state.rounds)
    for (const auto& fit : fit_q_round(mdp, exact_q_round(mdp, r))) CHECK(fit.max_abs_residual <= 1e-7);
}
