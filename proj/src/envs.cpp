#include "lbc/envs.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lbc/rng.hpp"

namespace lbc {

namespace {

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double out = 1.0;
  for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return out;
}

// Unique nonzero rows, identified up to sign.
MatrixXd unique_rows_up_to_sign(const MatrixXd& rows) {
  std::vector<VectorXd> kept;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    VectorXd r = rows.row(i).transpose();
    const double n = r.norm();
    if (n <= 1e-14) continue;
    for (Eigen::Index k = 0; k < r.size(); ++k) {
      if (std::abs(r[k]) > 1e-14 * n) {
        if (r[k] < 0) r = -r;
        break;
      }
    }
    bool dup = false;
    for (const auto& q : kept)
      if ((q - r).norm() <= 1e-12 * std::max(1.0, n)) {
        dup = true;
        break;
      }
    if (!dup) kept.push_back(r);
  }
  return stack_rows(kept);
}

VectorXd dirichlet(Rng& rng, int k) {
  std::gamma_distribution<double> g(1.0, 1.0);
  VectorXd v(k);
  for (int i = 0; i < k; ++i) v[i] = g(rng);
  const double s = v.sum();
  if (!(s > 0.0)) return VectorXd::Constant(k, 1.0 / k);
  return v / s;
}

}  // namespace

NormBound feature_norm_bound(const MatrixXd& rows, long max_solves) {
  NormBound out;
  const MatrixXd uniq = unique_rows_up_to_sign(rows);
  if (uniq.rows() == 0) throw Error("feature_norm_bound: all features are zero");

  Eigen::JacobiSVD<MatrixXd> svd(uniq, Eigen::ComputeFullV);
  const VectorXd& sv = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-10 * sv[0]) ++rank;
  out.rank = rank;
  const MatrixXd basis = svd.matrixV().leftCols(rank);
  const MatrixXd reduced = uniq * basis;  // N x r, full column rank
  const int n = static_cast<int>(reduced.rows());

  const double solves = binomial(n, rank) * std::ldexp(1.0, rank - 1);
  if (solves > static_cast<double>(max_solves)) {
    out.exact = false;
    out.value = std::sqrt(static_cast<double>(n)) / sv[rank - 1];
    return out;
  }

  double best = 0.0;
  std::vector<int> pick(static_cast<std::size_t>(rank));
  for (int i = 0; i < rank; ++i) pick[i] = i;
  MatrixXd sub(rank, rank);
  for (;;) {
    for (int i = 0; i < rank; ++i) sub.row(i) = reduced.row(pick[i]);
    Eigen::FullPivLU<MatrixXd> lu(sub);
    lu.setThreshold(1e-12);
    if (lu.rank() == rank) {
      const long sign_count = 1L << (rank - 1);
      for (long mask = 0; mask < sign_count; ++mask) {
        VectorXd rhs(rank);
        rhs[0] = 1.0;
        for (int i = 1; i < rank; ++i) rhs[i] = (mask >> (i - 1)) & 1L ? -1.0 : 1.0;
        const VectorXd z = lu.solve(rhs);
        if ((reduced * z).cwiseAbs().maxCoeff() <= 1.0 + 1e-9) best = std::max(best, z.norm());
      }
    }
    int i = rank - 1;
    while (i >= 0 && pick[i] == n - rank + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int j = i + 1; j < rank; ++j) pick[j] = pick[j - 1] + 1;
  }
  out.value = best;
  return out;
}

NormBound mdp_norm_bound(const std::vector<MatrixXd>& step_designs) {
  NormBound out;
  for (const auto& design : step_designs) {
    const NormBound b = feature_norm_bound(design);
    out.value = std::max(out.value, b.value);
    out.exact = out.exact && b.exact;
    out.rank = std::max(out.rank, b.rank);
  }
  return out;
}

FeatureMdp make_random_linear_mdp(int d, int num_actions, int horizon, int states_per_step, std::uint64_t seed) {
  if (d < 1 || num_actions < 1 || horizon < 1 || states_per_step < 1)
    throw Error("make_random_linear_mdp: all dimensions must be positive");
  constexpr int kMaxAttempts = 16;
  std::string last_error;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng = make_rng(seed, Stream::kEnvGen, static_cast<std::uint64_t>(attempt));
    const std::vector<int> states(static_cast<std::size_t>(horizon), states_per_step);
    std::vector<std::vector<MatrixXd>> features(static_cast<std::size_t>(horizon));
    for (int h = 0; h < horizon; ++h) {
      for (int x = 0; x < states_per_step; ++x) {
        MatrixXd f(num_actions, d);
        for (int a = 0; a < num_actions; ++a) f.row(a) = dirichlet(rng, d).transpose();
        features[h].push_back(std::move(f));
      }
    }
    std::vector<std::vector<MatrixXd>> transitions(static_cast<std::size_t>(horizon - 1));
    bool rows_ok = true;
    for (int h = 0; h + 1 < horizon; ++h) {
      MatrixXd mu(d, states_per_step);
      for (int k = 0; k < d; ++k) mu.row(k) = dirichlet(rng, states_per_step).transpose();
      for (int x = 0; x < states_per_step; ++x) {
        MatrixXd p = features[h][x] * mu;
        for (int a = 0; a < num_actions; ++a)
          if (std::abs(p.row(a).sum() - 1.0) > 1e-9 || p.row(a).minCoeff() < 0.0) rows_ok = false;
        transitions[h].push_back(std::move(p));
      }
    }
    std::vector<VectorXd> theta;
    for (int h = 0; h < horizon; ++h) {
      VectorXd t(d);
      for (int k = 0; k < d; ++k) t[k] = uniform01(rng);
      theta.push_back(t / std::max(1.0, t.norm()));
    }
    VectorXd initial = dirichlet(rng, states_per_step);
    if (!rows_ok) {
      last_error = "transition rows are not stochastic within 1e-9";
      continue;
    }
    std::vector<MatrixXd> designs;
    for (int h = 0; h < horizon; ++h) designs.push_back(stack_rows([&] {
      std::vector<VectorXd> rows;
      for (const auto& f : features[h])
        for (int a = 0; a < num_actions; ++a) rows.push_back(f.row(a).transpose());
      return rows;
    }()));
    const double b = mdp_norm_bound(designs).value;
    try {
      MdpValidation validation;
      validation.stochastic_tol = 1e-9;
      return FeatureMdp(horizon, num_actions, d, states, std::move(features), std::move(transitions),
                        std::move(theta), std::move(initial), b, validation);
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  throw Error("make_random_linear_mdp: generation failed after retries: " + last_error);
}

namespace {

FeatureMdp two_step_example(std::vector<double> phi1, std::vector<std::vector<double>> phi2,
                            std::vector<std::vector<double>> p1, bool raw_scale) {
  constexpr int kHorizon = 2;
  const double scale = raw_scale ? 1.0 : 1.0 / (2.0 * kHorizon);
  const int num_actions = 2;
  const int s2 = static_cast<int>(phi2.size());
  std::vector<std::vector<MatrixXd>> features(kHorizon);
  MatrixXd f1(num_actions, 1);
  f1 << phi1[0] * scale, phi1[1] * scale;
  features[0].push_back(f1);
  for (const auto& row : phi2) {
    MatrixXd f(num_actions, 1);
    f << row[0] * scale, row[1] * scale;
    features[1].push_back(f);
  }
  MatrixXd p(num_actions, s2);
  for (int a = 0; a < num_actions; ++a)
    for (int x = 0; x < s2; ++x) p(a, x) = p1[a][x];
  std::vector<std::vector<MatrixXd>> transitions(1);
  transitions[0].push_back(p);
  std::vector<VectorXd> theta(kHorizon, VectorXd::Zero(1));
  VectorXd initial = VectorXd::Ones(1);
  std::vector<MatrixXd> designs{features[0][0], [&] {
                                  MatrixXd m(s2 * num_actions, 1);
                                  for (int x = 0; x < s2; ++x) m.middleRows(x * num_actions, num_actions) = features[1][x];
                                  return m;
                                }()};
  const double b = mdp_norm_bound(designs).value;
  MdpValidation validation;
  validation.require_unit_features = !raw_scale;
  return FeatureMdp(kHorizon, num_actions, 1, {1, s2}, std::move(features), std::move(transitions),
                    std::move(theta), std::move(initial), b, validation);
}

}  // namespace

FeatureMdp make_lsvi_counterexample(bool raw_scale) {
  const double h = 2.0;
  return two_step_example({1.0, 2.0}, {{h, -h}, {2 * h, -2 * h}}, {{1.0, 0.0}, {0.0, 1.0}}, raw_scale);
}

FeatureMdp make_quadratic_counterexample(bool raw_scale) {
  return two_step_example({1.0, 1.0}, {{1.0, -1.0}, {2.0, 0.0}, {-2.0, 0.0}},
                          {{1.0, 0.0, 0.0}, {0.0, 0.5, 0.5}}, raw_scale);
}

BackupFitMulti bellman_backup_residual(const FeatureMdp& mdp, int h, const MatrixXd& g) {
  if (h < 0 || h + 1 >= mdp.horizon()) throw Error("bellman_backup_residual: step has no successor");
  if (g.rows() != mdp.num_states(h + 1)) throw Error("bellman_backup_residual: G has wrong length");
  const int s = mdp.num_states(h);
  const int num_actions = mdp.num_actions();
  MatrixXd backups(static_cast<Eigen::Index>(s) * num_actions, g.cols());
  for (int x = 0; x < s; ++x)
    backups.middleRows(static_cast<Eigen::Index>(x) * num_actions, num_actions) = mdp.transition_matrix(h, x) * g;
  const MatrixXd design = mdp.step_design(h);
  BackupFitMulti out;
  out.weights.resize(mdp.dim(), g.cols());
  if (g.cols() == 0) return out;
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(design);
  out.weights = cod.solve(backups);
  const MatrixXd resid = backups - design * out.weights;
  out.max_abs_residual = resid.size() ? resid.cwiseAbs().maxCoeff() : 0.0;
  out.sum_squared_residual = resid.squaredNorm();
  return out;
}

BackupFit bellman_backup_residual(const FeatureMdp& mdp, int h, const VectorXd& g) {
  const BackupFitMulti m = bellman_backup_residual(mdp, h, MatrixXd(g));
  return {m.max_abs_residual, m.sum_squared_residual, m.weights.col(0)};
}

LbcReport validate_lbc(const FeatureMdp& mdp, int n_probe, double tol, std::uint64_t seed) {
  const int d = mdp.dim();
  if (n_probe < d) throw Error("validate_lbc: probe count must be at least d");
  LbcReport report;
  report.probes = n_probe;
  report.tolerance = tol;
  for (int h = 0; h + 1 < mdp.horizon(); ++h) {
    const int next = h + 1;
    double worst = 0.0;
    for (int i = 0; i < n_probe; ++i) {
      VectorXd theta;
      if (i < d) {
        theta = VectorXd::Unit(d, i);
      } else {
        Rng rng = make_rng(seed, Stream::kProbe, static_cast<std::uint64_t>(h), static_cast<std::uint64_t>(i));
        theta = uniform_sphere(rng, d);
      }
      double scale = 0.0;
      for (int x = 0; x < mdp.num_states(next); ++x)
        scale = std::max(scale, (mdp.action_features(next, x) * theta).cwiseAbs().maxCoeff());
      if (scale > 0.0) theta /= scale;
      VectorXd g(mdp.num_states(next));
      for (int x = 0; x < mdp.num_states(next); ++x) g[x] = (mdp.action_features(next, x) * theta).maxCoeff();
      const double r = bellman_backup_residual(mdp, h, g).max_abs_residual;
      worst = std::max(worst, r);
      if (r > tol && !report.offending) report.offending = std::make_pair(h, i);
    }
    report.step_residual.push_back(worst);
    report.max_residual = std::max(report.max_residual, worst);
  }
  report.pass = !report.offending.has_value();
  return report;
}

nlohmann::json lbc_report_to_json(const LbcReport& report) {
  nlohmann::json j;
  j["pass"] = report.pass;
  j["probes"] = report.probes;
  j["tolerance"] = report.tolerance;
  j["max_residual"] = report.max_residual;
  j["step_residual"] = report.step_residual;
  if (report.offending) {
    j["offending_step"] = report.offending->first + 1;
    j["offending_probe"] = report.offending->second;
  } else {
    j["offending_step"] = nullptr;
    j["offending_probe"] = nullptr;
  }
  return j;
}

int feature_rank(const FeatureMdp& mdp, int h) {
  Eigen::JacobiSVD<MatrixXd> svd(mdp.step_design(h));
  const VectorXd& sv = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-10 * sv[0]) ++rank;
  return rank;
}

}  // namespace lbc
