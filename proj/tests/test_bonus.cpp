#include <doctest.h>

#include <cmath>
#include <numbers>

#include "lbc/bonus.hpp"
#include "lbc/envs.hpp"
#include "lbc/learner.hpp"

using namespace lbc;

namespace {

MatrixXd diag(std::initializer_list<double> d) {
  VectorXd v(static_cast<Eigen::Index>(d.size()));
  Eigen::Index i = 0;
  for (double x : d) v(i++) = x;
  return v.asDiagonal();
}

MatrixXd random_rotation(int d, Rng& rng) {
  MatrixXd g(d, d);
  for (int i = 0; i < d; ++i) g.col(i) = standard_normal_vector(rng, d);
  return Eigen::HouseholderQR<MatrixXd>(g).householderQ();
}

// Segment {(0,0), (1,1)} with S' = diag(1, 0), L' = diag(0, 1): the objective at
// xi = (t, t) is beta * t + (1 - t). Grid search over t.
double segment_grid_min(double beta) {
  double best = 1e300;
  for (int i = 0; i <= 10000; ++i) {
    const double t = i / 10000.0;
    best = std::min(best, beta * t + (1.0 - t));
  }
  return best;
}

}  // namespace

TEST_CASE("truncated pair") {
  SUBCASE("diagonal thresholding") {
    const OrthogonalPair p = trunc_pair(diag({2.0, 0.5}), 1.0);
    CHECK((p.sigma - diag({1.0, 0.0})).norm() <= 1e-12);
    CHECK((p.lambda - diag({0.0, 1.0})).norm() <= 1e-12);
  }
  SUBCASE("zero matrix is fully unexplored") {
    const OrthogonalPair p = trunc_pair(MatrixXd::Zero(3, 3), 0.3);
    CHECK(p.sigma.norm() == 0.0);
    CHECK((p.lambda - MatrixXd::Identity(3, 3)).norm() <= 1e-12);
  }
  SUBCASE("rotated spectrum keeps the top eigenspace") {
    Rng rng(0);
    const MatrixXd q = random_rotation(3, rng);
    const MatrixXd gamma = q * diag({3.0, 1.0, 0.1}) * q.transpose();
    const OrthogonalPair p = trunc_pair(gamma, 0.5);
    CHECK((p.sigma * gamma - gamma * p.sigma).norm() <= 1e-10);
    CHECK(p.sigma.trace() == doctest::Approx(2.0));
    CHECK((p.sigma * q.col(0)).norm() == doctest::Approx(1.0));
    CHECK((p.sigma * q.col(2)).norm() <= 1e-10);
    CHECK(pair_defect(p) <= 1e-10);
  }
  SUBCASE("rejects asymmetric input and non-positive thresholds") {
    MatrixXd bad = MatrixXd::Identity(2, 2);
    bad(0, 1) = 1e-3;
    CHECK_THROWS_AS(trunc_pair(bad, 0.5), Error);
    CHECK_THROWS_AS(trunc_pair(MatrixXd::Identity(2, 2), 0.0), Error);
  }
}

TEST_CASE("truncated linear bonus on small vertex sets") {
  const VectorXd e1 = VectorXd::Unit(2, 0), e2 = VectorXd::Unit(2, 1);
  Rng rng(1);
  const MatrixXd single = (MatrixXd(1, 2) << 0.3, -0.4).finished();
  for (int i = 0; i < 10; ++i)
    CHECK(f_tl(single, standard_normal_vector(rng, 2), standard_normal_vector(rng, 2)) == doctest::Approx(0.0));
  CHECK(f_tl((MatrixXd(2, 2) << 0, 0, 1, 0).finished(), e1, e2) == doctest::Approx(0.0));
  CHECK(f_tl((MatrixXd(2, 2) << 1, 0, 0, 1).finished(), e1, e2) == doctest::Approx(1.0));
}

TEST_CASE("Gaussian max term") {
  Rng rng(2);
  CHECK(f_normal(MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 2), 1000, rng).mean == 0.0);

  const McEstimate half = f_normal((MatrixXd(2, 1) << 1.0, -1.0).finished(), MatrixXd::Ones(1, 1), 200000, rng);
  const double half_normal_mean = std::sqrt(2.0 / std::numbers::pi);
  CHECK(half_normal_mean == doctest::Approx(0.79788).epsilon(1e-5));
  CHECK(std::abs(half.mean - half_normal_mean) <= 4 * half.std_error);

  // Corners of the unit square: an independent 1e7-draw estimate of
  // E max(w1, 0) + max(w2, 0) serves as the oracle.
  const MatrixXd square = (MatrixXd(4, 2) << 0, 0, 1, 0, 0, 1, 1, 1).finished();
  Rng model_rng(10);
  const McEstimate est = f_normal(square, MatrixXd::Identity(2, 2), 1000000, model_rng);
  Rng oracle_rng(99);
  std::normal_distribution<double> n01;
  double sum = 0.0, sum2 = 0.0;
  const long m = 10000000;
  for (long i = 0; i < m; ++i) {
    const double v = std::max(n01(oracle_rng), 0.0) + std::max(n01(oracle_rng), 0.0);
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / m;
  const double se = std::sqrt((sum2 / m - mean * mean) / m);
  CHECK(std::abs(est.mean - mean) <= 4 * std::hypot(se, est.std_error));
}

TEST_CASE("quadratic bonus") {
  CHECK(b_quad(VectorXd::Unit(3, 0), MatrixXd::Identity(3, 3)) == doctest::Approx(1.0));
  CHECK(b_quad(VectorXd::Zero(3), MatrixXd::Identity(3, 3)) == 0.0);
  CHECK(b_quad(VectorXd::Ones(2), diag({4.0, 9.0})) == doctest::Approx(std::sqrt(13.0)));
  CHECK(b_quad(VectorXd::Ones(2), diag({4.0, 9.0})) == doctest::Approx(3.6056).epsilon(1e-4));
}

TEST_CASE("midpoint") {
  const OrthogonalPair split{diag({1.0, 0.0}), diag({0.0, 1.0})};
  SUBCASE("coinciding endpoints at a vertex") {
    const MatrixXd v = (MatrixXd(3, 2) << 1, 0, 0, 1, 0.5, 0.5).finished();
    const MidpointResult r = midpoint(v, v.row(1).transpose(), v.row(1).transpose(), split, 2.0);
    CHECK(r.objective <= 1e-9);
    CHECK((r.point - v.row(1).transpose()).norm() <= 1e-6);
  }
  const MatrixXd segment = (MatrixXd(2, 2) << 0, 0, 1, 1).finished();
  const VectorXd phi1 = VectorXd::Zero(2), phi2 = VectorXd::Ones(2);
  SUBCASE("segment with beta 2") {
    const MidpointResult r = midpoint(segment, phi1, phi2, split, 2.0);
    CHECK(r.objective == doctest::Approx(segment_grid_min(2.0)).epsilon(1e-6));
    CHECK(r.objective == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.point.norm() <= 1e-6);
  }
  SUBCASE("segment with beta 1 has a flat objective") {
    const MidpointResult r = midpoint(segment, phi1, phi2, split, 1.0);
    CHECK(r.objective == doctest::Approx(segment_grid_min(1.0)).epsilon(1e-6));
    CHECK(midpoint_objective(r.point, phi1, phi2, split, 1.0) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("parameter schedules") {
  SUBCASE("theoretical backup and truncation levels") {
    const ParamSet p = theoretical_params(0.2, 0.1, 1, 2, 2, 1.0);
    CHECK(p.lambda1 == doctest::Approx(2.0));
    CHECK(p.eps_bkup == doctest::Approx(0.05));
    CHECK(p.sigma_tr == doctest::Approx(0.00625));
    CHECK(p.xi >= 1.0);
  }
  SUBCASE("practical defaults") {
    const ParamSet p = practical_params(4, 2, 3, 5.0, 200, 600);
    CHECK(p.beta == 2.0);
    CHECK(p.lambda == 1.0);
    CHECK(p.lambda1 == doctest::Approx(15.0));
    CHECK(p.m_tl == 256);
    CHECK(p.m_n == 256);
    CHECK(p.c_tl() == doctest::Approx(p.lambda1));
    CHECK(p.sigma_tr == doctest::Approx(2.0 / (15.0 * std::sqrt(12.0))));
  }
  SUBCASE("derived Gaussian-max constant") {
    const Constants c;
    CHECK(c.sigmap_constant(2) == doctest::Approx(6.0 * std::pow(6.0 * std::sqrt(2.0 * std::numbers::pi), 0.25)));
  }
  CHECK_THROWS_AS(theoretical_params(-1.0, 0.1, 1, 2, 2, 1.0), Error);
}

TEST_CASE("frozen bonus") {
  const ParamSet params = practical_params(2, 3, 2, 1.0, 10, 10);
  SUBCASE("fully explored pair gives zero bonus") {
    Rng rng(0);
    const OrthogonalPair explored{MatrixXd::Zero(2, 2), MatrixXd::Identity(2, 2)};
    const FrozenBonus f = make_bonus_from_pair(explored, params, 0, rng);
    CHECK(f.u_samples().norm() == 0.0);
    CHECK(f.w_samples().norm() == 0.0);
    const MatrixXd phi = (MatrixXd(3, 2) << 1, 0, 0, 1, -0.5, 0.5).finished();
    CHECK(f.eval(phi) == 0.0);
  }
  SUBCASE("huge covariance truncates to the explored pair") {
    const OrthogonalPair p = covariance_pair(1e12 * MatrixXd::Identity(2, 2), params);
    CHECK(p.sigma.norm() == 0.0);
  }
  SUBCASE("samples lie in the ranges of their projections") {
    Rng rng(1);
    const OrthogonalPair half{diag({1.0, 0.0}), diag({0.0, 1.0})};
    const FrozenBonus f = make_bonus_from_pair(half, params, 0, rng);
    CHECK((half.lambda * f.u_samples()).norm() <= 1e-12);
    CHECK((half.lambda * f.w_samples()).norm() <= 1e-12);
    CHECK((half.sigma * f.v_samples()).norm() <= 1e-12);
    const MatrixXd phi = (MatrixXd(3, 2) << 1, 0, 0, 1, -0.5, 0.5).finished();
    CHECK(f.eval(phi) >= 0.0);
    const FrozenBonus back = FrozenBonus::from_json(f.to_json());
    CHECK(back.eval(phi) == f.eval(phi));
  }
  SUBCASE("bonus is nonnegative on random states") {
    const FeatureMdp mdp = make_random_linear_mdp(2, 3, 2, 10, 4);
    Rng rng(5);
    const MatrixXd cov = MatrixXd::Identity(2, 2) * 3.0;
    const FrozenBonus f = make_bonus(cov, params, 0, rng);
    CHECK(f.eval_states(mdp).minCoeff() >= 0.0);
  }
}

TEST_CASE("ridge regression") {
  SUBCASE("no data") {
    const RidgeFit r = ridge_fit(MatrixXd(0, 3), VectorXd(0), 2.0);
    CHECK(r.weights.norm() == 0.0);
    CHECK((r.cov - 2.0 * MatrixXd::Identity(3, 3)).norm() == 0.0);
  }
  SUBCASE("one sample") {
    const RidgeFit r = ridge_fit(VectorXd::Unit(2, 0).transpose(), VectorXd::Ones(1), 1.0);
    CHECK(r.weights(0) == doctest::Approx(0.5));
    CHECK(r.weights(1) == 0.0);
  }
  SUBCASE("noiseless recovery") {
    Rng rng(8);
    MatrixXd x(500, 4);
    for (int i = 0; i < 500; ++i) x.row(i) = standard_normal_vector(rng, 4).transpose();
    const VectorXd w = (VectorXd(4) << 0.5, -1.0, 2.0, 0.25).finished();
    const RidgeFit r = ridge_fit(x, x * w, 1e-8);
    CHECK((r.weights - w).norm() <= 1e-6);
  }
}
