#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>

#include "lbc/policy.hpp"
#include "support.hpp"

using namespace lbc;
using lbc::testing::bandit_mdp;
using lbc::testing::freq_se;
using lbc::testing::normal_cdf;

namespace {

MatrixXd rows(std::initializer_list<std::initializer_list<double>> r) {
  MatrixXd m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

template <typename Act>
std::vector<double> frequencies(int num_actions, long draws, Act&& act) {
  std::vector<long> counts(static_cast<std::size_t>(num_actions), 0);
  for (long i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(act())];
  std::vector<double> f;
  for (long c : counts) f.push_back(static_cast<double>(c) / static_cast<double>(draws));
  return f;
}

}  // namespace

TEST_CASE("linear policy picks the strict maximizer") {
  const FeatureMdp mdp = bandit_mdp(rows({{0.5}, {1.0}}));
  Rng rng(7);
  for (int i = 0; i < 100; ++i) CHECK(act_linear(mdp, VectorXd::Ones(1), 0, 0, rng) == 1);
}

TEST_CASE("zero weights on antipodal features split evenly") {
  const FeatureMdp mdp = bandit_mdp(rows({{0.6, 0.8}, {-0.6, -0.8}}));
  Rng rng(11);
  const long n = 200000;
  const auto f = frequencies(2, n, [&] { return act_linear(mdp, VectorXd::Zero(2), 0, 0, rng); });
  CHECK(std::abs(f[0] - 0.5) <= 4 * freq_se(0.5, n));
}

TEST_CASE("zero weights on three symmetric unit features give one third each") {
  const double c = std::cos(2 * std::numbers::pi / 3), s = std::sin(2 * std::numbers::pi / 3);
  const FeatureMdp mdp = bandit_mdp(rows({{1.0, 0.0}, {c, s}, {c, -s}}));
  Rng rng(3);
  const long n = 1000000;
  const auto f = frequencies(3, n, [&] { return act_linear(mdp, VectorXd::Zero(2), 0, 0, rng); });
  for (double p : f) CHECK(std::abs(p - 1.0 / 3.0) <= 3 * freq_se(1.0 / 3.0, n));
}

TEST_CASE("perturbed policy on +-1 features follows the normal CDF") {
  const FeatureMdp mdp = bandit_mdp(rows({{1.0}, {-1.0}}));
  const long n = 1000000;
  Rng rng(5);
  const auto f = frequencies(2, n, [&] { return act_perturbed(mdp, VectorXd::Ones(1), 1.0, 0, 0, rng); });
  const double p = normal_cdf(1.0);
  CHECK(p == doctest::Approx(0.8413).epsilon(1e-4));
  CHECK(std::abs(f[0] - p) <= 3 * freq_se(p, n));

  Rng rng0(6);
  const auto g = frequencies(2, 200000, [&] { return act_perturbed(mdp, VectorXd::Zero(1), 1.0, 0, 0, rng0); });
  CHECK(std::abs(g[0] - 0.5) <= 4 * freq_se(0.5, 200000));
}

TEST_CASE("perturbed policy with sigma 0 matches the linear policy") {
  const FeatureMdp mdp = bandit_mdp(rows({{0.0, 1.0}, {0.0, -1.0}, {-1.0, 0.0}}));
  const VectorXd w = (VectorXd(2) << 1.0, 0.0).finished();
  const long n = 200000;
  Rng r1(1), r2(2);
  const auto lin = frequencies(3, n, [&] { return act_linear(mdp, w, 0, 0, r1); });
  const auto pert = frequencies(3, n, [&] { return act_perturbed(mdp, w, 0.0, 0, 0, r2); });
  for (int a = 0; a < 3; ++a) CHECK(std::abs(lin[a] - pert[a]) <= 4 * std::sqrt(2.0) * freq_se(0.5, n));
  CHECK(lin[2] == 0.0);
  CHECK(pert[2] == 0.0);
}

TEST_CASE("perturbed laws converge to the linear law as sigma shrinks") {
  // w ties actions 0 and 1 exactly; action 2 trails by 1.
  const FeatureMdp mdp = bandit_mdp(rows({{0.0, 1.0}, {0.0, -1.0}, {-1.0, 0.0}}));
  const VectorXd w = (VectorXd(2) << 1.0, 0.0).finished();
  const long n = 200000;
  const VectorXd linear_law = action_distribution(mdp, *make_linear({w}), 0, 0);
  CHECK(linear_law(0) == doctest::Approx(0.5));
  CHECK(linear_law(1) == doctest::Approx(0.5));
  CHECK(linear_law(2) == 0.0);
  std::uint64_t seed = 100;
  for (double sigma : {1e-2, 1e-3, 1e-4}) {
    Rng rng(seed++);
    const auto f = frequencies(3, n, [&] { return act_perturbed(mdp, w, sigma, 0, 0, rng); });
    for (int a = 0; a < 3; ++a) CHECK(std::abs(f[a] - linear_law(a)) <= 4 * freq_se(0.5, n));
  }
}

TEST_CASE("greedy policy breaks ties toward the lowest index") {
  const FeatureMdp mdp = bandit_mdp(rows({{1.0}, {1.0}, {0.5}}));
  CHECK(act_greedy(mdp, VectorXd::Ones(1), 0, 0) == 0);
  CHECK(argmax_lowest((VectorXd(3) << 2.0, 3.0, 3.0).finished()) == 1);
}

TEST_CASE("closed-form action laws sum to one") {
  const FeatureMdp mdp = bandit_mdp(rows({{1.0, 0.0}, {0.0, 1.0}, {0.5, 0.5}}));
  const VectorXd w = (VectorXd(2) << 1.0, 0.5).finished();
  for (const PolicyPtr& p : {make_uniform(), make_greedy({w}), make_linear({w}), make_linear({-w})}) {
    const VectorXd law = action_distribution(mdp, *p, 0, 0);
    CHECK(law.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(law.minCoeff() >= 0.0);
  }
  CHECK_THROWS_AS(action_distribution(mdp, *make_perturbed({VectorXd::Ones(2)}, {0.5}), 0, 0), Error);
}

TEST_CASE("mixture expands into weighted Markov components") {
  const PolicyPtr mix = make_mixture({make_uniform(), make_greedy({VectorXd::Ones(1), VectorXd::Ones(1)})});
  const auto comps = expand_markov(*mix, 2);
  REQUIRE(comps.size() == 2);
  CHECK(comps[0].weight + comps[1].weight == doctest::Approx(1.0));
}
