#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lbc/bonus.hpp"
#include "lbc/envs.hpp"
#include "lbc/learner.hpp"

namespace lbc {

/// Outcome of one executable check.
///
/// `worst_margin` is the smallest slack observed over all trials, where the
/// slack of a trial is (bound side) - (checked side) with any allowed Monte
/// Carlo margin already added to the bound side. A negative value means at
/// least one violation. `details` holds check-specific numbers.
struct CheckReport {
  std::string name;
  long trials = 0;
  long violations = 0;
  long skipped = 0;
  double worst_margin = 0.0;
  double tolerance = 0.0;
  bool pass = true;
  nlohmann::json details = nlohmann::json::object();

  double violation_rate() const { return trials > 0 ? static_cast<double>(violations) / trials : 0.0; }
  /// Largest amount by which a trial missed its bound (0 when none did).
  double worst_violation() const { return worst_margin < 0.0 ? -worst_margin : 0.0; }
};

nlohmann::json check_report_to_json(const CheckReport& report);
CheckReport check_report_from_json(const nlohmann::json& j);

/// Number of Monte Carlo standard errors allowed on every stochastic check.
inline constexpr double kMcMargin = 4.0;

// ---------------------------------------------------------------------------
// Optimism and regression confidence on a finished run

/// Both near-optimism inequalities at every (t, h, x, a):
///   eps_bkup (H - h) + Q_h^t(x, a)            >= Q*_h(x, a)
///   eps_bkup (H + 1 - h) + V_h^t(x) + F_h^t(x) >= V*_h(x)
/// with 1-based h. Q^t is computed exactly from the frozen bonuses.
CheckReport check_optimism(const FeatureMdp& mdp, const LearnerState& state, const ParamSet& params,
                           double tolerance = 0.0);

/// |<phi, w_hat - w>| <= beta ||phi||_{Sigma^{-1}} at every dataset feature of
/// every (t, h), where w is the least-squares fit of the exact Q_h^t. A trial
/// is one (t, h); it passes when every feature of its dataset satisfies the
/// bound. `details.pass_fraction` is the fraction of passing (t, h).
CheckReport check_regression_confidence(const FeatureMdp& mdp, const LearnerState& state, const ParamSet& params);

/// Backup of every frozen bonus F_h^t (h >= 2, 1-based) from step h - 1 is
/// linear in the features up to `tolerance`.
CheckReport check_bonus_linearity(const FeatureMdp& mdp, const LearnerState& state, double tolerance = 1e-8);

/// Exact Q_h^t is linear in the step-h features up to `tolerance` for all (t, h).
CheckReport check_q_linearity(const FeatureMdp& mdp, const LearnerState& state, double tolerance = 1e-7);

/// Absolute bound |F_h^t(x)| <= beta / (2 C_reg H B sqrt(d iota)) at every state.
CheckReport check_bonus_bound(const FeatureMdp& mdp, const LearnerState& state, const ParamSet& params);

/// |F_h^t(x)| <= sqrt(d) beta lambda_1 (C_sb / eps_apx)^(2A) F^normal(x; S'),
/// with F^normal re-estimated from `samples` fresh draws. The margin allows
/// four standard errors of both the frozen bonus and the fresh estimate.
CheckReport check_sigmap_bound(const FeatureMdp& mdp, const LearnerState& state, const ParamSet& params,
                               int samples = 100000, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Elliptic potential

struct EllipticPotential {
  double lhs = 0.0;
  double bound = 0.0;
};

/// sum_t <Gamma_t, Sigma_{t-1}^{-1}> with Sigma_t = lambda I + sum_{s<=t} Gamma_s,
/// against 2 d log(2T). Throws if some trace exceeds 1 + 1e-10 or lambda < 1.
EllipticPotential check_elliptic_potential(const std::vector<MatrixXd>& gammas, double lambda);

/// Random admissible sequences (T <= 50, d <= 8).
CheckReport check_elliptic_potential_suite(int trials, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Gaussian max bonus

struct QuadraticSim {
  double lower = 0.0;
  double mid = 0.0;
  double mid_se = 0.0;
  double upper = 0.0;
  double upper_se = 0.0;
  bool pass = true;
};

/// lower = max pairwise Sigma-seminorm of vertex differences / sqrt(2 pi),
/// mid = Monte Carlo E max <w, phi>, upper = sqrt(d) (E phi_w^T Sigma phi_w)^(1/2).
/// Passes when lower <= mid + 4 se(mid) and mid <= upper + 4 se(mid - upper).
QuadraticSim check_quadratic_sim(const MatrixXd& vertices, const MatrixXd& sigma, int samples, Rng& rng);

CheckReport check_quadratic_sim_suite(int trials, int samples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Truncated linear bonus

/// 0 <= F^tl(u, v) <= 2 min(width_u, width_v) on random instances.
CheckReport check_tl_upper_bound_suite(int trials, std::uint64_t seed);
/// F^tl(a_u u, a_v v) >= min(a_u, a_v) F^tl(u, v) - 1e-10 on random instances.
CheckReport check_alpha_lb_suite(int trials, std::uint64_t seed);
/// F^tl depends on u, v only through their inner products with the vertices.
CheckReport check_polygon_isometry_suite(int trials, std::uint64_t seed);

struct OptimalPerimeterInstance {
  MatrixXd vertices;
  OrthogonalPair pair;
  double beta = 1.0;
  double eps = 0.1;
  double zeta = 1.0;
  VectorXd phi1;
  VectorXd phi2;
};

struct OptimalPerimeterResult {
  bool admissible = true;
  double lhs = 0.0;
  double lhs_se = 0.0;
  double rhs = 0.0;
  double midpoint_objective = 0.0;
  bool pass = true;
};

/// Largest of max ||beta S (phi - phi')|| and max ||L (phi - phi')|| over vertex pairs.
double skew(const MatrixXd& vertices, const OrthogonalPair& pair, double beta);

/// lhs = (C_cor / eps)^(2A) * mean F^tl(Phi; beta u', v') with u' ~ N(0, S),
/// v' ~ N(0, L); rhs = objective at the midpoint - 4 eps zeta. Passes when
/// lhs >= rhs - 4 se(lhs). Instances violating the skew bound for the given
/// zeta are reported as not admissible.
OptimalPerimeterResult check_optimal_perimeter(const OptimalPerimeterInstance& instance, int samples, Rng& rng,
                                               double c_cor = 6.0);

/// Random instances (A <= 4, d <= 6) until `trials` admissible ones were checked.
CheckReport check_optimal_perimeter_suite(int trials, int samples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Truncation

/// S' <= Gamma / sigma in Loewner order (1e-9) on random PSD Gamma.
CheckReport check_orig_truncated_suite(int trials, std::uint64_t seed);

/// ||Gamma (phi_a - v)|| + ||v - phi_a'|| <= ||Gamma|| ||S' (phi_a - v)|| + ||L' (v - phi_a')||
///   + sqrt(2 pi) F^normal(S') + 2 sigma, for v in the hull of the action features.
CheckReport check_bound_truncation_error_suite(int trials, int samples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Bellman linearity

/// (a) 100 random linear-max functions and (b) 100 random linear-policy
/// feature maps on `mdp` (residual <= tolerance), plus (c) the two non
/// Bellman-linear functions on the raw-scale counterexamples, whose
/// residual^2 must equal 0.8 and 0.5 within 1e-9.
CheckReport check_bellman_linearity_suite(const FeatureMdp& mdp, std::uint64_t seed, double tolerance = 1e-8);

/// x -> max_a min{<w, phi_2(x, a)>, H}: the clipped value target of the
/// LSVI example, as a function over step-2 states.
VectorXd lsvi_clipped_value(const FeatureMdp& mdp, double w);
/// x -> max_a ||phi_2(x, a)||_2 over step-2 states.
VectorXd max_feature_norm(const FeatureMdp& mdp);

/// Q_h^pi of random linear policies is linear in the features with
/// ||w_h^pi|| <= H B.
CheckReport check_policy_q_linearity(const FeatureMdp& mdp, int policies, std::uint64_t seed,
                                     double tolerance = 1e-8);

}  // namespace lbc
