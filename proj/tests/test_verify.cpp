#include <doctest.h>

#include <cmath>
#include <numbers>

#include "lbc/envs.hpp"
#include "lbc/verify.hpp"
#include "support.hpp"

using namespace lbc;
using lbc::testing::chain_mdp;

TEST_CASE("elliptic potential") {
  SUBCASE("unit scalar increments") {
    const std::vector<MatrixXd> gammas(3, MatrixXd::Ones(1, 1));
    const EllipticPotential e = check_elliptic_potential(gammas, 1.0);
    CHECK(e.lhs == doctest::Approx(11.0 / 6.0));
    CHECK(e.bound == doctest::Approx(2.0 * std::log(6.0)));
  }
  SUBCASE("zero increments") {
    CHECK(check_elliptic_potential(std::vector<MatrixXd>(4, MatrixXd::Zero(2, 2)), 1.0).lhs == 0.0);
  }
  SUBCASE("inadmissible inputs") {
    CHECK_THROWS_AS(check_elliptic_potential({2.0 * MatrixXd::Identity(1, 1)}, 1.0), Error);
    CHECK_THROWS_AS(check_elliptic_potential({MatrixXd::Zero(1, 1)}, 0.5), Error);
  }
  SUBCASE("random suite") {
    const CheckReport r = check_elliptic_potential_suite(100, 0);
    CHECK(r.pass);
    CHECK(r.violations == 0);
  }
}

TEST_CASE("Gaussian max sandwich") {
  Rng rng(0);
  SUBCASE("zero covariance") {
    const QuadraticSim q = check_quadratic_sim(MatrixXd::Identity(3, 3), MatrixXd::Zero(3, 3), 1000, rng);
    CHECK(q.lower == 0.0);
    CHECK(q.mid == 0.0);
    CHECK(q.upper == 0.0);
    CHECK(q.pass);
  }
  SUBCASE("one-dimensional +-1") {
    const QuadraticSim q =
        check_quadratic_sim((MatrixXd(2, 1) << 1.0, -1.0).finished(), MatrixXd::Ones(1, 1), 200000, rng);
    const double half_normal = 2.0 / std::sqrt(2.0 * std::numbers::pi);
    CHECK(q.lower == doctest::Approx(half_normal));
    CHECK(std::abs(q.mid - half_normal) <= 4 * q.mid_se);
    CHECK(q.upper == doctest::Approx(1.0));
    CHECK(q.pass);
  }
}

TEST_CASE("lemma suites pass on small batches") {
  for (const CheckReport& r :
       {check_quadratic_sim_suite(50, 20000, 1), check_tl_upper_bound_suite(100, 1), check_alpha_lb_suite(100, 1),
        check_polygon_isometry_suite(100, 1), check_orig_truncated_suite(30, 1),
        check_bound_truncation_error_suite(20, 20000, 1), check_optimal_perimeter_suite(10, 5000, 1)}) {
    INFO(r.name);
    CHECK(r.pass);
    CHECK(r.violations == 0);
    CHECK(r.trials > 0);
  }
}

TEST_CASE("optimal perimeter at a shared vertex") {
  Rng rng(2);
  OptimalPerimeterInstance inst;
  inst.vertices = (MatrixXd(3, 2) << 1, 0, 0, 1, -1, 0).finished();
  inst.pair = trunc_pair((MatrixXd(2, 2) << 2, 0, 0, 0.1).finished(), 1.0);
  inst.beta = 2.0;
  inst.eps = 0.2;
  inst.zeta = skew(inst.vertices, inst.pair, inst.beta);
  inst.phi1 = inst.vertices.row(1).transpose();
  inst.phi2 = inst.phi1;
  const OptimalPerimeterResult r = check_optimal_perimeter(inst, 2000, rng);
  CHECK(r.admissible);
  CHECK(r.rhs <= 0.0);
  CHECK(r.lhs >= 0.0);
  CHECK(r.pass);
}

TEST_CASE("suites are deterministic and reports serialize losslessly") {
  const CheckReport a = check_quadratic_sim_suite(20, 5000, 9);
  const CheckReport b = check_quadratic_sim_suite(20, 5000, 9);
  CHECK(check_report_to_json(a).dump() == check_report_to_json(b).dump());
  const CheckReport back = check_report_from_json(check_report_to_json(a));
  CHECK(check_report_to_json(back).dump() == check_report_to_json(a).dump());
  CHECK(back.worst_margin == a.worst_margin);
}

TEST_CASE("Bellman linearity suites on the seed-0 env") {
  const FeatureMdp mdp = make_random_linear_mdp(4, 2, 3, 8, 0);
  const CheckReport bl = check_bellman_linearity_suite(mdp, 0);
  CHECK(bl.pass);
  CHECK(std::abs(bl.details.at("lsvi_ssr").get<double>() - 0.8) <= 1e-9);
  CHECK(std::abs(bl.details.at("quadratic_ssr").get<double>() - 0.5) <= 1e-9);
  const CheckReport pq = check_policy_q_linearity(mdp, 20, 0);
  CHECK(pq.pass);
}

TEST_CASE("optimism on trivial environments") {
  SUBCASE("single action") {
    const FeatureMdp mdp = chain_mdp({0.2, 0.4});
    const ParamSet params = theoretical_params(0.5, 0.1, 1, 1, 2, mdp.norm_bound(), {}, 3, 9);
    LearnerState state;
    run_psdp_ucb(mdp, params, {.rounds = 3, .samples = 9, .seed = 0}, &state);
    const CheckReport r = check_optimism(mdp, state, params);
    CHECK(r.violations == 0);
    CHECK(r.worst_margin >= 0.0);
  }
  SUBCASE("zero rewards") {
    const FeatureMdp mdp = make_lsvi_counterexample();
    const ParamSet params = theoretical_params(0.5, 0.1, 1, 2, 2, mdp.norm_bound(), {}, 3, 9);
    LearnerState state;
    run_psdp_ucb(mdp, params, {.rounds = 3, .samples = 9, .seed = 0}, &state);
    CHECK(check_optimism(mdp, state, params).violations == 0);
  }
}

TEST_CASE("frozen bonuses are Bellman-linear on a short practical run") {
  const FeatureMdp mdp = make_random_linear_mdp(4, 2, 3, 8, 0);
  PracticalOptions opt;
  opt.explored_threshold = 64.0;
  const ParamSet params = practical_params(4, 2, 3, mdp.norm_bound(), 2, 600, opt);
  LearnerState state;
  run_psdp_ucb(mdp, params, {.rounds = 2, .samples = 600, .seed = 0}, &state);
  const CheckReport r = check_bonus_linearity(mdp, state);
  CHECK(r.pass);
  CHECK(r.details.at("mixed_pairs").get<int>() > 0);
  CHECK(check_q_linearity(mdp, state).pass);
}
