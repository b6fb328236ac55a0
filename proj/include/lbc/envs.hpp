#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lbc/mdp.hpp"

namespace lbc {

/// Largest ||w||_2 over {w in span(rows) : |<row, w>| <= 1 for every row}.
///
/// Computed exactly by enumerating the vertices of that polytope (each vertex
/// is pinned by `rank` independent active constraints). When the enumeration
/// would exceed `max_solves` linear solves, the bound sqrt(N) / sigma_min is
/// returned instead and `exact` is false.
struct NormBound {
  double value = 0.0;
  bool exact = true;
  int rank = 0;
};
NormBound feature_norm_bound(const MatrixXd& rows, long max_solves = 2'000'000);

/// max over steps of feature_norm_bound(step_design(h)).
NormBound mdp_norm_bound(const std::vector<MatrixXd>& step_designs);

/// Random linear MDP: P_h(x' | x, a) = <phi_h(x, a), mu_h(x')>.
///
/// Features are Dirichlet(1) draws on the probability simplex (so each has
/// l2 norm at most 1), each coordinate of mu_h is a Dirichlet(1) distribution
/// over next states, reward parameters have U[0, 1] entries rescaled into
/// the unit ball, and d_1 is Dirichlet(1). B is computed exactly.
FeatureMdp make_random_linear_mdp(int d, int num_actions, int horizon, int states_per_step, std::uint64_t seed);

/// Two-step, one-dimensional example on which clipped value targets are not
/// Bellman-linear. Features are divided by 2H unless `raw_scale` is set.
FeatureMdp make_lsvi_counterexample(bool raw_scale = false);

/// Two-step, one-dimensional example on which the max-norm (quadratic-style)
/// bonus is not Bellman-linear. Same scaling convention.
FeatureMdp make_quadratic_counterexample(bool raw_scale = false);

/// Fit of b(x, a) = sum_x' P_h(x' | x, a) G(x') by <w, phi_h(x, a)>.
struct BackupFit {
  double max_abs_residual = 0.0;
  double sum_squared_residual = 0.0;
  VectorXd weights;
};

/// h is 0-based and must satisfy h < H - 1; `g` has length S_{h+1}.
BackupFit bellman_backup_residual(const FeatureMdp& mdp, int h, const VectorXd& g);

/// Column-wise version: `g` is S_{h+1} x k; the residual is the maximum
/// over columns, the sum of squares is summed over columns, and the
/// weights are returned as a d x k matrix.
struct BackupFitMulti {
  double max_abs_residual = 0.0;
  double sum_squared_residual = 0.0;
  MatrixXd weights;
};
BackupFitMulti bellman_backup_residual(const FeatureMdp& mdp, int h, const MatrixXd& g);

struct LbcReport {
  /// Worst residual for the backup from step h+1 into step h, for h < H-1.
  std::vector<double> step_residual;
  int probes = 0;
  double tolerance = 0.0;
  double max_residual = 0.0;
  bool pass = true;
  /// (h, probe index) of the first probe exceeding the tolerance.
  std::optional<std::pair<int, int>> offending;
};

/// Checks that every probe max_a <theta, phi_{h+1}(., a)> has a linear backup.
/// Probes: the d canonical directions, then n_probe - d seeded random
/// directions, each divided by its largest absolute score on step h+1.
LbcReport validate_lbc(const FeatureMdp& mdp, int n_probe, double tol, std::uint64_t seed = 0);

nlohmann::json lbc_report_to_json(const LbcReport& report);

/// Rank of the step-h feature matrix (relative tolerance 1e-10).
int feature_rank(const FeatureMdp& mdp, int h);

}  // namespace lbc
