#include <doctest.h>

#include <cmath>

#include "lbc/envs.hpp"
#include "lbc/verify.hpp"

using namespace lbc;

namespace {

// Hand least squares for one-dimensional features: w = <phi, b> / <phi, phi>.
double scalar_ssr(const FeatureMdp& mdp, const VectorXd& g) {
  double pp = 0.0, pb = 0.0;
  std::vector<std::pair<double, double>> cells;
  for (int x = 0; x < mdp.num_states(0); ++x)
    for (int a = 0; a < mdp.num_actions(); ++a) {
      double b = 0.0;
      for (int y = 0; y < mdp.num_states(1); ++y) b += mdp.transition_matrix(0, x)(a, y) * g(y);
      const double phi = mdp.feature(0, x, a)(0);
      cells.emplace_back(phi, b);
      pp += phi * phi;
      pb += phi * b;
    }
  const double w = pb / pp;
  double ssr = 0.0;
  for (auto [phi, b] : cells) ssr += (b - w * phi) * (b - w * phi);
  return ssr;
}

}  // namespace

TEST_CASE("exact norm bound on hand polytopes") {
  CHECK(feature_norm_bound(MatrixXd::Identity(2, 2)).value == doctest::Approx(std::sqrt(2.0)));
  const MatrixXd rows = (MatrixXd(2, 2) << 1.0, 0.0, 1.0, 1.0).finished();
  const NormBound nb = feature_norm_bound(rows);
  CHECK(nb.exact);
  CHECK(nb.value == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("random linear MDP generator") {
  SUBCASE("degenerate one-dimensional case") {
    const FeatureMdp mdp = make_random_linear_mdp(1, 1, 3, 1, 17);
    for (int h = 0; h + 1 < mdp.horizon(); ++h) CHECK(mdp.transition_matrix(h, 0)(0, 0) == doctest::Approx(1.0));
    const LbcReport r = validate_lbc(mdp, 4, 1e-12);
    CHECK(r.pass);
    CHECK(r.max_residual <= 1e-15);
  }
  SUBCASE("seed 0 instance is Bellman complete and reproducible") {
    const FeatureMdp a = make_random_linear_mdp(4, 2, 3, 8, 0);
    const LbcReport r = validate_lbc(a, 16, 1e-9);
    CHECK(r.pass);
    CHECK(r.max_residual <= 1e-9);
    CHECK(mdp_to_json(a).dump() == mdp_to_json(make_random_linear_mdp(4, 2, 3, 8, 0)).dump());
    CHECK(mdp_to_json(a).dump() != mdp_to_json(make_random_linear_mdp(4, 2, 3, 8, 1)).dump());
    for (int h = 0; h < 3; ++h) CHECK(feature_rank(a, h) == 4);
  }
}

TEST_CASE("MDP files round trip and reject broken rows") {
  const FeatureMdp mdp = make_random_linear_mdp(3, 2, 3, 4, 5);
  const nlohmann::json j = mdp_to_json(mdp);
  CHECK(mdp_to_json(mdp_from_json(j)).dump() == j.dump());

  nlohmann::json broken = j;
  broken["P"][1][2][0][0] = broken["P"][1][2][0][0].get<double>() - 0.1;
  try {
    mdp_from_json(broken);
    FAIL("expected a validation error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("P(1,2,0)") != std::string::npos);
  }
}

TEST_CASE("counterexample environments") {
  SUBCASE("both are Bellman complete at raw scale") {
    CHECK(validate_lbc(make_lsvi_counterexample(true), 4, 1e-12).pass);
    CHECK(validate_lbc(make_quadratic_counterexample(true), 4, 1e-12).pass);
    CHECK(validate_lbc(make_lsvi_counterexample(), 4, 1e-12).pass);
  }
  SUBCASE("clipped value target leaves residual^2 0.8") {
    const FeatureMdp mdp = make_lsvi_counterexample(true);
    const VectorXd g = lsvi_clipped_value(mdp, 1.0);
    const double oracle = scalar_ssr(mdp, g);
    CHECK(oracle == doctest::Approx(0.8).epsilon(1e-12));
    const BackupFit fit = bellman_backup_residual(mdp, 0, g);
    CHECK(std::abs(fit.sum_squared_residual - 0.8) <= 1e-9);
    CHECK(fit.weights(0) == doctest::Approx(1.2));
  }
  SUBCASE("max-norm target leaves residual^2 0.5") {
    const FeatureMdp mdp = make_quadratic_counterexample(true);
    const VectorXd g = max_feature_norm(mdp);
    CHECK(scalar_ssr(mdp, g) == doctest::Approx(0.5).epsilon(1e-12));
    const BackupFit fit = bellman_backup_residual(mdp, 0, g);
    CHECK(std::abs(fit.sum_squared_residual - 0.5) <= 1e-9);
    CHECK(fit.weights(0) == doctest::Approx(1.5));
  }
  SUBCASE("merging the step-1 features breaks completeness") {
    nlohmann::json j = mdp_to_json(make_lsvi_counterexample(true));
    j["phi"][0][0][1] = j["phi"][0][0][0];
    const FeatureMdp edited = mdp_from_json(j);
    const LbcReport r = validate_lbc(edited, 4, 1e-9);
    CHECK_FALSE(r.pass);
    REQUIRE(r.offending.has_value());
    CHECK(r.offending->first == 0);
  }
}

TEST_CASE("backup of the zero function") {
  const FeatureMdp mdp = make_random_linear_mdp(4, 2, 3, 8, 0);
  const BackupFit fit = bellman_backup_residual(mdp, 1, VectorXd(VectorXd::Zero(mdp.num_states(2))));
  CHECK(fit.max_abs_residual == 0.0);
  CHECK(fit.weights.norm() == 0.0);
}

TEST_CASE("linear-max functions have linear backups") {
  const FeatureMdp mdp = make_random_linear_mdp(4, 2, 3, 8, 0);
  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    const VectorXd theta = standard_normal_vector(rng, 4);
    VectorXd g(mdp.num_states(2));
    for (int x = 0; x < g.size(); ++x) g(x) = (mdp.action_features(2, x) * theta).maxCoeff();
    CHECK(bellman_backup_residual(mdp, 1, g).max_abs_residual <= 1e-8 * std::max(1.0, g.cwiseAbs().maxCoeff()));
  }
}
