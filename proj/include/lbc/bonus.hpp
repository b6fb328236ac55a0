#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "lbc/mdp.hpp"
#include "lbc/rng.hpp"

namespace lbc {

/// Complementary orthogonal projections (explored / unexplored directions).
struct OrthogonalPair {
  MatrixXd sigma;   // projection onto eigen-directions at or above the threshold
  MatrixXd lambda;  // projection onto the rest
};

/// Largest Frobenius deviation among S^2 - S, L^2 - L, SL, LS and S + L - I.
double pair_defect(const OrthogonalPair& pair);

/// Thresholds the eigenvalues of a symmetric PSD matrix at `sigma`.
/// Throws lbc::Error if the asymmetry exceeds 1e-8 or sigma <= 0.
OrthogonalPair trunc_pair(const MatrixXd& gamma, double sigma);

/// Truncated linear bonus over the rows of `vertices`:
///   max <u, phi> + max <v, phi> - max <u + v, phi>.
double f_tl(const MatrixXd& vertices, const VectorXd& u, const VectorXd& v);

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int samples = 0;
};

/// Monte Carlo estimate of E_{w ~ N(0, cov)} [max_a <w, vertices_a>].
McEstimate f_normal(const MatrixXd& vertices, const MatrixXd& cov, int samples, Rng& rng);

/// sqrt(phi^T sigma phi). Quadratic forms in (-1e-12, 0) are clamped to 0;
/// anything more negative is reported as a non-PSD input.
double b_quad(const VectorXd& phi, const MatrixXd& sigma);

struct MidpointResult {
  VectorXd point;
  VectorXd weights;  // convex weights over the vertices
  double objective = 0.0;
  bool converged = true;
};

/// Minimizes ||beta S (phi1 - xi)|| + ||L (xi - phi2)|| over the convex hull
/// of the vertex rows, using pairwise Frank-Wolfe with exact line search on a
/// smoothed objective, smoothing continuation down to 1e-9, and restarts.
MidpointResult midpoint(const MatrixXd& vertices, const VectorXd& phi1, const VectorXd& phi2,
                        const OrthogonalPair& pair, double beta, double tol = 1e-9, std::uint64_t seed = 0);

/// Objective of `midpoint` at a given point.
double midpoint_objective(const VectorXd& xi, const VectorXd& phi1, const VectorXd& phi2,
                          const OrthogonalPair& pair, double beta);

/// Absolute constants that the analysis leaves unspecified.
struct Constants {
  double c_psd = 1.0;
  double c_thm = 1.0;
  double c_reg = 1.0;
  double c_cor = 6.0;
  /// Constant in the bound of the bonus by the Gaussian-max term. When unset,
  /// the smallest value the bonus construction provably satisfies is used:
  /// c_cor * (6 sqrt(2 pi))^(1 / 2A).
  std::optional<double> c_sb;

  double sigmap_constant(int num_actions) const;
};

enum class ParamMode { kTheoretical, kPractical };

std::string to_string(ParamMode mode);
ParamMode param_mode_from_string(const std::string& s);

/// Algorithm and analysis parameters. `rounds` and `samples_per_phase` hold
/// the values the formulas define (possibly astronomically large); the run
/// length actually executed is chosen separately by the caller.
struct ParamSet {
  ParamMode mode = ParamMode::kPractical;
  double eps_final = 0.5;
  double delta = 0.1;
  int dim = 1;
  int num_actions = 1;
  int horizon = 1;
  double norm_bound = 1.0;
  Constants constants;

  double lambda = 1.0;
  double rounds = 1.0;
  double samples_per_phase = 3.0;
  double iota = 1.0;
  double lambda1 = 1.0;
  double eps_bkup = 0.0;
  double sigma_tr = 0.0;
  double eps_apx = 1.0;
  double beta = 1.0;
  double xi = 1.0;

  int m_tl = 512;
  int m_n = 512;
  /// Set when a Monte Carlo sample count was clipped to its configured cap.
  bool samples_capped = false;

  /// lambda_1 (c_cor / eps_apx)^(2A)
  double c_tl() const;
  /// 2 sqrt(2 pi) lambda_1 xi
  double c_n() const;
};

/// Evaluates every formula in dependency order. If `run_rounds` and
/// `run_samples` are given, T and n take those values and lambda and iota are
/// evaluated with them; all other formulas are unchanged. Monte Carlo sample
/// counts are ceil(log(T / delta) / eps_apx^2) capped at `max_samples`.
/// Throws lbc::Error on invalid inputs or if xi < 1.
ParamSet theoretical_params(double eps_final, double delta, int d, int num_actions, int horizon, double norm_bound,
                            const Constants& constants = {}, std::optional<int> run_rounds = std::nullopt,
                            std::optional<int> run_samples = std::nullopt, int max_samples = 2048);

/// Desk-scale schedule: beta, lambda, and lambda_1 = BH as given, eps_apx =
/// c_cor (so the truncated-bonus coefficient is lambda_1), xi = 1, and
/// sigma_tr = beta / (lambda_1 sqrt(kappa)), which makes a direction count as
/// explored once the covariance eigenvalue reaches `kappa`.
struct PracticalOptions {
  double beta = 2.0;
  double lambda = 1.0;
  std::optional<double> lambda1;
  double explored_threshold = 12.0;
  std::optional<double> sigma_tr;
  int m_tl = 256;
  int m_n = 256;
  double eps_final = 0.5;
  double delta = 0.1;
};
ParamSet practical_params(int d, int num_actions, int horizon, double norm_bound, int run_rounds, int run_samples,
                          const PracticalOptions& options = {}, const Constants& constants = {});

nlohmann::json params_to_json(const ParamSet& p);

/// Antithetic estimate of max_a s_a from one Gaussian draw: the average of
/// max_a <w, phi_a> and max_a <-w, phi_a>, i.e. (max s - min s) / 2.
double antithetic_max(const VectorXd& scores);

/// Bonus F_h^t backed by frozen Gaussian samples, so that it is a fixed
/// function of the state. Evaluation at state x with action features Phi:
///   c_tl * mean_i F^tl(Phi; beta u_i, v_i) + c_n * mean_j antithetic_max(Phi w_j).
/// Each w_j enters together with -w_j, so both terms are >= 0 exactly and the
/// bonus stays an average of max-of-linear functions of the features.
class FrozenBonus {
 public:
  FrozenBonus() = default;
  FrozenBonus(int step, OrthogonalPair pair, double beta, double c_tl, double c_n, MatrixXd u, MatrixXd v,
              MatrixXd w);

  /// A bonus equal to `value` at every state (no Gaussian terms).
  static FrozenBonus constant(int step, OrthogonalPair pair, double value);

  int step() const { return step_; }
  double offset() const { return offset_; }
  const OrthogonalPair& pair() const { return pair_; }
  double beta() const { return beta_; }
  double c_tl() const { return c_tl_; }
  double c_n() const { return c_n_; }
  /// Sample matrices hold one sample per column.
  const MatrixXd& u_samples() const { return u_; }
  const MatrixXd& v_samples() const { return v_; }
  const MatrixXd& w_samples() const { return w_; }

  double eval(const MatrixXd& action_features) const;
  /// The two terms separately (each already multiplied by its coefficient).
  std::pair<double, double> eval_terms(const MatrixXd& action_features) const;
  /// Frozen Monte Carlo estimate of E_{w ~ N(0, S')} max_a <w, phi_a>.
  double gaussian_max(const MatrixXd& action_features) const;
  /// Bonus at every state of this bonus' step.
  VectorXd eval_states(const FeatureMdp& mdp) const;

  nlohmann::json to_json() const;
  static FrozenBonus from_json(const nlohmann::json& j);

 private:
  int step_ = 0;
  OrthogonalPair pair_;
  double beta_ = 0.0;
  double c_tl_ = 0.0;
  double c_n_ = 0.0;
  MatrixXd u_;
  MatrixXd v_;
  MatrixXd w_;
  double offset_ = 0.0;
};

/// Builds F_h^t from the step-h covariance: the pair is the sigma_tr
/// truncation of (beta / lambda_1) cov^{-1/2}; u, v, w samples are drawn
/// from `rng` in that order. Rejects cov with minimum eigenvalue below 1.
FrozenBonus make_bonus(const MatrixXd& cov, const ParamSet& params, int h, Rng& rng);

/// The sigma_tr truncation of (beta / lambda_1) cov^{-1/2}.
OrthogonalPair covariance_pair(const MatrixXd& cov, const ParamSet& params);

/// Same, but with an explicit pair (used by tests and diagnostics).
FrozenBonus make_bonus_from_pair(const OrthogonalPair& pair, const ParamSet& params, int h, Rng& rng);

nlohmann::json matrix_to_json(const MatrixXd& m);
MatrixXd matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const VectorXd& v);
VectorXd vector_from_json(const nlohmann::json& j);

}  // namespace lbc
