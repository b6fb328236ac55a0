#include <doctest.h>

#include <numeric>

#include "lbc/envs.hpp"
#include "lbc/evaluation.hpp"
#include "lbc/learner.hpp"
#include "support.hpp"

using namespace lbc;
using lbc::testing::chain_mdp;

TEST_CASE("rollout on a deterministic unit-reward chain") {
  const FeatureMdp mdp = chain_mdp({1.0, 1.0, 1.0});
  Rng rng(0);
  const Trajectory traj = rollout(mdp, *make_uniform(), rng);
  REQUIRE(traj.size() == 3);
  for (const auto& s : traj) CHECK(s.reward == 1.0);
}

TEST_CASE("rollouts on zero-reward examples collect nothing") {
  for (const FeatureMdp& mdp : {make_lsvi_counterexample(), make_quadratic_counterexample()}) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      Rng rng(seed);
      for (const auto& s : rollout(mdp, *make_uniform(), rng)) CHECK(s.reward == 0.0);
    }
  }
}

TEST_CASE("rollouts replay under a fixed seed") {
  const FeatureMdp mdp = make_random_linear_mdp(4, 2, 3, 8, 0);
  const PolicyPtr pi = make_linear({VectorXd::Ones(4), VectorXd::Zero(4), -VectorXd::Ones(4)});
  Rng a(42), b(42);
  const Trajectory ta = rollout(mdp, *pi, a), tb = rollout(mdp, *pi, b);
  for (std::size_t h = 0; h < ta.size(); ++h) {
    CHECK(ta[h].state == tb[h].state);
    CHECK(ta[h].action == tb[h].action);
    CHECK(ta[h].reward == tb[h].reward);
  }
}

TEST_CASE("optimal values on small examples") {
  const QTable zero = exact_q_star(make_lsvi_counterexample());
  for (const auto& q : zero.q) CHECK(q.cwiseAbs().maxCoeff() == 0.0);
  for (const auto& v : zero.v) CHECK(v.cwiseAbs().maxCoeff() == 0.0);

  CHECK(exact_q_star(make_quadratic_counterexample()).v[0](0) == 0.0);
  CHECK(exact_q_star(chain_mdp({0.5, 1.0})).v[0](0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(policy_value_exact(make_lsvi_counterexample(), *make_uniform()).value == 0.0);
}

TEST_CASE("Monte Carlo value agrees with exact occupancy propagation") {
  const FeatureMdp mdp = make_random_linear_mdp(4, 2, 3, 8, 0);
  const PolicyPtr pi = make_linear({VectorXd::Ones(4), -VectorXd::Ones(4), VectorXd::Unit(4, 2)});
  const double exact = policy_value_exact(mdp, *pi).value;
  const MonteCarloValue mc = policy_value_monte_carlo(mdp, *pi, 100000, 0);
  CHECK(mc.episodes == 100000);
  CHECK(std::abs(mc.mean - exact) <= 4 * mc.std_error);
}

TEST_CASE("occupancy measures are distributions at every step") {
  const FeatureMdp mdp = make_random_linear_mdp(3, 3, 4, 5, 9);
  const ExactValue ev = policy_value_exact(mdp, *make_uniform());
  for (const auto& occ : ev.occupancy) CHECK(occ.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("performance difference decomposition") {
  const FeatureMdp mdp = make_random_linear_mdp(4, 2, 3, 8, 0);
  const PolicyPtr pi = make_linear({VectorXd::Unit(4, 0), VectorXd::Unit(4, 1), VectorXd::Unit(4, 3)});

  SUBCASE("identical policies") {
    for (double g : perf_diff_decompose(mdp, *pi, *pi)) CHECK(std::abs(g) <= 1e-12);
  }
  SUBCASE("terms telescope to the value difference") {
    for (const PolicyPtr& other :
         {make_uniform(), make_greedy({-VectorXd::Ones(4), VectorXd::Ones(4), VectorXd::Unit(4, 2)}),
          make_mixture({make_uniform(), pi})}) {
      const auto g = perf_diff_decompose(mdp, *pi, *other);
      const double lhs = std::accumulate(g.begin(), g.end(), 0.0);
      const double rhs = policy_value_exact(mdp, *pi).value - policy_value_exact(mdp, *other).value;
      CHECK(std::abs(lhs - rhs) <= 1e-8);
    }
  }
  SUBCASE("optimal policy dominates every step") {
    const QTable star = exact_q_star(mdp);
    std::vector<VectorXd> w;
    for (const auto& fit : fit_q_round(mdp, star)) w.push_back(fit.weights);
    const PolicyPtr opt = make_greedy(w);
    CHECK(policy_value_exact(mdp, *opt).value == doctest::Approx(star.v[0].dot(mdp.initial_distribution())));
    for (const PolicyPtr& other : {make_uniform(), pi}) {
      for (double g : perf_diff_decompose(mdp, *opt, *other)) CHECK(g >= -1e-10);
    }
  }
}

TEST_CASE("policy Q with a state bonus adds the bonus of later steps only") {
  const FeatureMdp mdp = chain_mdp({1.0, 1.0, 1.0});
  const std::vector<VectorXd> bonus = {VectorXd::Constant(1, 100.0), VectorXd::Constant(1, 0.5),
                                       VectorXd::Constant(1, 0.25)};
  const QTable q = policy_q(mdp, *make_uniform(), bonus);
  CHECK(q.q[0](0, 0) == doctest::Approx(3.75));
  CHECK(q.q[2](0, 0) == doctest::Approx(1.0));
}
