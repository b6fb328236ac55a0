#include "lbc/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/QR>

#include "lbc/linalg.hpp"
#include "lbc/parallel.hpp"

namespace lbc {

namespace {

constexpr double kSqrt2Pi = 2.5066282746310002;

// Sub-stream ids under Stream::kCheck, one per suite.
enum CheckId : std::uint64_t {
  kIdElliptic = 1,
  kIdQuadraticSim = 2,
  kIdTlUpper = 3,
  kIdAlpha = 4,
  kIdIsometry = 5,
  kIdPerimeter = 6,
  kIdTruncated = 7,
  kIdTruncationError = 8,
  kIdBellman = 9,
  kIdPolicyQ = 10,
  kIdSigmap = 11,
};

Rng trial_rng(std::uint64_t seed, CheckId id, std::uint64_t i, std::uint64_t j = 0) {
  return make_rng(seed, Stream::kCheck, id, i, j);
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
double log_uniform(Rng& rng, double lo, double hi) { return std::exp(uniform(rng, std::log(lo), std::log(hi))); }

// n points with l2 norm at most 1.
MatrixXd random_points(Rng& rng, int n, int d) {
  MatrixXd out(n, d);
  for (int i = 0; i < n; ++i) out.row(i) = uniform_sphere(rng, d).transpose() * uniform01(rng);
  return out;
}

MatrixXd random_orthogonal(Rng& rng, int d) {
  MatrixXd g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = standard_normal(rng);
  Eigen::HouseholderQR<MatrixXd> qr(g);
  return qr.householderQ() * MatrixXd::Identity(d, d);
}

// Random PSD matrix of random rank with spectral scale around `scale`.
MatrixXd random_psd(Rng& rng, int d, double scale) {
  const int rank = uniform_int(rng, 0, d);
  MatrixXd g(d, std::max(rank, 1));
  g.setZero();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < rank; ++j) g(i, j) = standard_normal(rng);
  return scale * g * g.transpose() / std::max(1, d);
}

OrthogonalPair random_pair(Rng& rng, int d) {
  const int rank = uniform_int(rng, 0, d);
  const MatrixXd q = random_orthogonal(rng, d);
  OrthogonalPair pair;
  pair.sigma = q.leftCols(rank) * q.leftCols(rank).transpose();
  pair.lambda = MatrixXd::Identity(d, d) - pair.sigma;
  return pair;
}

double width(const MatrixXd& vertices, const VectorXd& u) {
  const VectorXd s = vertices * u;
  return s.maxCoeff() - s.minCoeff();
}

struct Mean {
  double mean = 0.0;
  double se = 0.0;
};

Mean mean_and_se(const std::vector<double>& xs) {
  Mean m;
  const double n = static_cast<double>(xs.size());
  if (xs.empty()) return m;
  double sum = 0.0;
  for (double x : xs) sum += x;
  m.mean = sum / n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return m;
}

// Folds per-trial slacks into a report (violation iff slack < 0).
void absorb(CheckReport& r, double slack) {
  if (r.trials == 0 || slack < r.worst_margin) r.worst_margin = slack;
  ++r.trials;
  if (!(slack >= 0.0)) ++r.violations;
}

void finish(CheckReport& r) { r.pass = r.violations == 0; }

CheckReport make_report(std::string name, double tolerance) {
  CheckReport r;
  r.name = std::move(name);
  r.tolerance = tolerance;
  return r;
}

}  // namespace

nlohmann::json check_report_to_json(const CheckReport& r) {
  nlohmann::json j;
  j["name"] = r.name;
  j["trials"] = r.trials;
  j["violations"] = r.violations;
  j["skipped"] = r.skipped;
  j["worst_margin"] = r.worst_margin;
  j["tolerance"] = r.tolerance;
  j["pass"] = r.pass;
  j["details"] = r.details;
  return j;
}

CheckReport check_report_from_json(const nlohmann::json& j) {
  CheckReport r;
  try {
    r.name = j.at("name").get<std::string>();
    r.trials = j.at("trials").get<long>();
    r.violations = j.at("violations").get<long>();
    r.skipped = j.at("skipped").get<long>();
    r.worst_margin = j.at("worst_margin").get<double>();
    r.tolerance = j.at("tolerance").get<double>();
    r.pass = j.at("pass").get<bool>();
    r.details = j.value("details", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("check report: ") + e.what());
  }
  return r;
}

// ---------------------------------------------------------------------------

CheckReport check_optimism(const FeatureMdp& mdp, const LearnerState& state, const ParamSet& params,
                           double tolerance) {
  CheckReport r = make_report("optimism", tolerance);
  const QTable star = exact_q_star(mdp);
  const int horizon = mdp.horizon();
  const double eps = params.eps_bkup;
  long q_trials = 0, q_viol = 0, v_trials = 0, v_viol = 0;
  double q_worst = std::numeric_limits<double>::infinity(), v_worst = q_worst;
  for (const RoundRecord& rec : state.rounds) {
    const QTable q = exact_q_round(mdp, rec);
    for (int h = 0; h < horizon; ++h) {
      const int step = h + 1;
      for (int x = 0; x < mdp.num_states(h); ++x) {
        for (int a = 0; a < mdp.num_actions(); ++a) {
          const double slack = eps * (horizon - step) + q.q[h](x, a) - star.q[h](x, a) + tolerance;
          absorb(r, slack);
          ++q_trials;
          if (!(slack >= 0.0)) ++q_viol;
          q_worst = std::min(q_worst, slack);
        }
        const double slack =
            eps * (horizon + 1 - step) + q.v[h][x] + rec.bonus_values[h][x] - star.v[h][x] + tolerance;
        absorb(r, slack);
        ++v_trials;
        if (!(slack >= 0.0)) ++v_viol;
        v_worst = std::min(v_worst, slack);
      }
    }
  }
  finish(r);
  r.details["eps_bkup"] = eps;
  r.details["rounds"] = state.completed_rounds();
  r.details["q_cells"] = q_trials;
  r.details["q_violations"] = q_viol;
  r.details["q_worst_margin"] = q_trials ? q_worst : 0.0;
  r.details["v_cells"] = v_trials;
  r.details["v_violations"] = v_viol;
  r.details["v_worst_margin"] = v_trials ? v_worst : 0.0;
  r.details["violation_rate"] = r.violation_rate();
  r.details["worst_violation"] = r.worst_violation();
  return r;
}

CheckReport check_regression_confidence(const FeatureMdp& mdp, const LearnerState& state, const ParamSet& params) {
  CheckReport r = make_report("regression_confidence", 0.0);
  long features = 0, feature_violations = 0;
  double worst_ratio = 0.0;
  for (const RoundRecord& rec : state.rounds) {
    const auto fits = fit_q_round(mdp, exact_q_round(mdp, rec));
    for (int h = 0; h < mdp.horizon(); ++h) {
      const auto& states = rec.data_states[h];
      const auto& actions = rec.data_actions[h];
      if (states.empty()) throw Error("regression confidence: round " + std::to_string(rec.round) +
                                      " has no stored dataset");
      const VectorXd diff = rec.w_hat[h] - fits[h].weights;
      const Eigen::LDLT<MatrixXd> ldlt(rec.cov[h]);
      double worst = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < states.size(); ++i) {
        const VectorXd phi = mdp.action_features(h, states[i]).row(actions[i]).transpose();
        const double lhs = std::abs(phi.dot(diff));
        const double rhs = params.beta * std::sqrt(std::max(0.0, phi.dot(ldlt.solve(phi))));
        const double slack = rhs - lhs;
        ++features;
        if (!(slack >= 0.0)) ++feature_violations;
        if (rhs > 0.0) worst_ratio = std::max(worst_ratio, lhs / rhs);
        worst = std::min(worst, slack);
      }
      absorb(r, worst);
    }
  }
  finish(r);
  r.details["pass_fraction"] = r.trials ? 1.0 - r.violation_rate() : 1.0;
  r.details["features"] = features;
  r.details["feature_violations"] = feature_violations;
  r.details["worst_ratio"] = worst_ratio;
  return r;
}

CheckReport check_bonus_linearity(const FeatureMdp& mdp, const LearnerState& state, double tolerance) {
  CheckReport r = make_report("bonus_linearity", tolerance);
  const int d = mdp.dim();
  long nontrivial = 0;
  double worst_residual = 0.0;
  for (const RoundRecord& rec : state.rounds) {
    for (int h = 1; h < mdp.horizon(); ++h) {
      const BackupFit fit = bellman_backup_residual(mdp, h - 1, rec.bonus_values[h]);
      worst_residual = std::max(worst_residual, fit.max_abs_residual);
      absorb(r, tolerance - fit.max_abs_residual);
      const double rank = rec.bonus[h].pair().sigma.trace();
      if (rank > 0.5 && rank < d - 0.5) ++nontrivial;
    }
  }
  finish(r);
  r.details["max_residual"] = worst_residual;
  r.details["mixed_pairs"] = nontrivial;
  return r;
}

CheckReport check_q_linearity(const FeatureMdp& mdp, const LearnerState& state, double tolerance) {
  CheckReport r = make_report("q_linearity", tolerance);
  double worst_residual = 0.0;
  for (const RoundRecord& rec : state.rounds) {
    for (const auto& fit : fit_q_round(mdp, exact_q_round(mdp, rec))) {
      worst_residual = std::max(worst_residual, fit.max_abs_residual);
      absorb(r, tolerance - fit.max_abs_residual);
    }
  }
  finish(r);
  r.details["max_residual"] = worst_residual;
  return r;
}

CheckReport check_bonus_bound(const FeatureMdp& mdp, const LearnerState& state, const ParamSet& p) {
  const double bound =
      p.beta / (2.0 * p.constants.c_reg * p.horizon * p.norm_bound * std::sqrt(p.dim * p.iota));
  CheckReport r = make_report("bonus_bound", 0.0);
  double largest = 0.0;
  for (const RoundRecord& rec : state.rounds)
    for (int h = 0; h < mdp.horizon(); ++h)
      for (Eigen::Index x = 0; x < rec.bonus_values[h].size(); ++x) {
        const double f = std::abs(rec.bonus_values[h][x]);
        largest = std::max(largest, f);
        absorb(r, bound - f);
      }
  finish(r);
  r.details["bound"] = bound;
  r.details["max_abs_bonus"] = largest;
  return r;
}

CheckReport check_sigmap_bound(const FeatureMdp& mdp, const LearnerState& state, const ParamSet& p, int samples,
                               std::uint64_t seed) {
  const int a_count = mdp.num_actions();
  const double coef = std::sqrt(static_cast<double>(p.dim)) * p.beta * p.lambda1 *
                      std::pow(p.constants.sigmap_constant(a_count) / p.eps_apx, 2.0 * a_count);
  CheckReport r = make_report("sigmap_bound", kMcMargin);
  struct Cell {
    int t, h, x;
  };
  std::vector<Cell> cells;
  for (const RoundRecord& rec : state.rounds)
    for (int h = 0; h < mdp.horizon(); ++h)
      for (int x = 0; x < mdp.num_states(h); ++x) cells.push_back({rec.round, h, x});
  std::vector<double> slack(cells.size());
  parallel_for(cells.size(), [&](std::size_t k) {
    const Cell& c = cells[k];
    const FrozenBonus& bonus = state.rounds[static_cast<std::size_t>(c.t - 1)].bonus[c.h];
    const MatrixXd& phi = mdp.action_features(c.h, c.x);
    const double value = bonus.eval(phi);
    // Standard error of the frozen estimate from its own samples.
    double bonus_se = 0.0;
    if (bonus.u_samples().cols() > 1) {
      std::vector<double> tl(static_cast<std::size_t>(bonus.u_samples().cols()));
      for (Eigen::Index i = 0; i < bonus.u_samples().cols(); ++i)
        tl[i] = f_tl(phi, bonus.beta() * bonus.u_samples().col(i), bonus.v_samples().col(i));
      bonus_se += bonus.c_tl() * mean_and_se(tl).se;
    }
    if (bonus.w_samples().cols() > 1) {
      std::vector<double> mx(static_cast<std::size_t>(bonus.w_samples().cols()));
      for (Eigen::Index j = 0; j < bonus.w_samples().cols(); ++j) mx[j] = antithetic_max(phi * bonus.w_samples().col(j));
      bonus_se += bonus.c_n() * mean_and_se(mx).se;
    }
    Rng rng = trial_rng(seed, kIdSigmap, static_cast<std::uint64_t>(c.t), static_cast<std::uint64_t>(c.h) << 32 | c.x);
    const McEstimate fn = f_normal(phi, bonus.pair().sigma, samples, rng);
    slack[k] = coef * (fn.mean + kMcMargin * fn.std_error) + kMcMargin * bonus_se - std::abs(value);
  });
  for (double s : slack) absorb(r, s);
  finish(r);
  r.details["coefficient"] = coef;
  r.details["c_sb"] = p.constants.sigmap_constant(a_count);
  return r;
}

// ---------------------------------------------------------------------------

EllipticPotential check_elliptic_potential(const std::vector<MatrixXd>& gammas, double lambda) {
  if (!(lambda >= 1.0)) throw Error("elliptic potential: lambda must be at least 1");
  EllipticPotential out;
  if (gammas.empty()) return out;
  const Eigen::Index d = gammas.front().rows();
  MatrixXd sigma = lambda * MatrixXd::Identity(d, d);
  for (std::size_t t = 0; t < gammas.size(); ++t) {
    const MatrixXd& g = gammas[t];
    if (g.rows() != d || g.cols() != d) throw Error("elliptic potential: dimension mismatch");
    if (g.trace() > 1.0 + 1e-10)
      throw Error("elliptic potential: trace of Gamma_" + std::to_string(t + 1) + " exceeds 1");
    out.lhs += sigma.ldlt().solve(g).trace();
    sigma += g;
  }
  out.bound = 2.0 * static_cast<double>(d) * std::log(2.0 * static_cast<double>(gammas.size()));
  return out;
}

CheckReport check_elliptic_potential_suite(int trials, std::uint64_t seed) {
  CheckReport r = make_report("elliptic_potential", 0.0);
  std::vector<double> slack(static_cast<std::size_t>(trials));
  parallel_for(slack.size(), [&](std::size_t i) {
    Rng rng = trial_rng(seed, kIdElliptic, i);
    const int d = uniform_int(rng, 1, 8);
    const int horizon = uniform_int(rng, 1, 50);
    const double lambda = uniform(rng, 1.0, 3.0);
    std::vector<MatrixXd> gammas;
    for (int t = 0; t < horizon; ++t) {
      MatrixXd g = random_psd(rng, d, 1.0);
      const double tr = g.trace();
      if (tr > 0.0) g *= uniform(rng, 0.0, 1.0) / tr;
      gammas.push_back(g);
    }
    const EllipticPotential e = check_elliptic_potential(gammas, lambda);
    slack[i] = e.bound - e.lhs;
  });
  for (double s : slack) absorb(r, s);
  finish(r);
  return r;
}

// ---------------------------------------------------------------------------

QuadraticSim check_quadratic_sim(const MatrixXd& vertices, const MatrixXd& sigma, int samples, Rng& rng) {
  if (samples < 1) throw Error("quadratic sim: sample count must be positive");
  if (vertices.rows() == 0) throw Error("quadratic sim: empty vertex set");
  const Eigen::Index d = sigma.rows();
  QuadraticSim out;
  double widest = 0.0;
  for (Eigen::Index i = 0; i < vertices.rows(); ++i)
    for (Eigen::Index j = i + 1; j < vertices.rows(); ++j) {
      const VectorXd diff = (vertices.row(i) - vertices.row(j)).transpose();
      widest = std::max(widest, std::sqrt(std::max(0.0, diff.dot(sigma * diff))));
    }
  out.lower = widest / kSqrt2Pi;

  const MatrixXd root = psd_sqrt(sigma);
  const VectorXd quad = (vertices * sigma * vertices.transpose()).diagonal();
  std::vector<double> maxima(static_cast<std::size_t>(samples)),
      quads(static_cast<std::size_t>(samples));
  for (int s = 0; s < samples; ++s) {
    const VectorXd w = root * standard_normal_vector(rng, d);
    const VectorXd scores = vertices * w;
    const int k = argmax_lowest(scores);
    maxima[s] = scores[k];
    quads[s] = quad[k];
  }
  const Mean m = mean_and_se(maxima);
  const Mean q = mean_and_se(quads);
  out.mid = m.mean;
  out.mid_se = m.se;
  const double e_q = std::max(0.0, q.mean);
  out.upper = std::sqrt(static_cast<double>(d)) * std::sqrt(e_q);
  out.upper_se = e_q > 0.0 ? std::sqrt(static_cast<double>(d)) * q.se / (2.0 * std::sqrt(e_q)) : 0.0;
  const double combined = std::sqrt(out.mid_se * out.mid_se + out.upper_se * out.upper_se);
  out.pass = out.lower <= out.mid + kMcMargin * out.mid_se && out.mid <= out.upper + kMcMargin * combined;
  return out;
}

CheckReport check_quadratic_sim_suite(int trials, int samples, std::uint64_t seed) {
  CheckReport r = make_report("quadratic_sim", kMcMargin);
  std::vector<double> slack(static_cast<std::size_t>(trials));
  parallel_for(slack.size(), [&](std::size_t i) {
    Rng rng = trial_rng(seed, kIdQuadraticSim, i);
    const int d = uniform_int(rng, 1, 6);
    const int n = uniform_int(rng, 1, 5);
    const MatrixXd vertices = random_points(rng, n, d);
    const MatrixXd sigma = random_psd(rng, d, log_uniform(rng, 0.1, 10.0));
    const QuadraticSim q = check_quadratic_sim(vertices, sigma, samples, rng);
    const double combined = std::sqrt(q.mid_se * q.mid_se + q.upper_se * q.upper_se);
    slack[i] = std::min(q.mid + kMcMargin * q.mid_se - q.lower, q.upper + kMcMargin * combined - q.mid);
  });
  for (double s : slack) absorb(r, s);
  finish(r);
  r.details["samples"] = samples;
  return r;
}

// ---------------------------------------------------------------------------

CheckReport check_tl_upper_bound_suite(int trials, std::uint64_t seed) {
  CheckReport r = make_report("tl_upper_bound", 1e-10);
  for (int i = 0; i < trials; ++i) {
    Rng rng = trial_rng(seed, kIdTlUpper, static_cast<std::uint64_t>(i));
    const int d = uniform_int(rng, 1, 6);
    const MatrixXd vertices = random_points(rng, uniform_int(rng, 1, 6), d);
    const VectorXd u = standard_normal_vector(rng, d) * log_uniform(rng, 0.1, 10.0);
    const VectorXd v = standard_normal_vector(rng, d) * log_uniform(rng, 0.1, 10.0);
    const double f = f_tl(vertices, u, v);
    const double upper = 2.0 * std::min(width(vertices, u), width(vertices, v));
    absorb(r, std::min(f, upper - f) + r.tolerance);
  }
  finish(r);
  return r;
}

CheckReport check_alpha_lb_suite(int trials, std::uint64_t seed) {
  CheckReport r = make_report("alpha_lb", 1e-10);
  for (int i = 0; i < trials; ++i) {
    Rng rng = trial_rng(seed, kIdAlpha, static_cast<std::uint64_t>(i));
    const int d = uniform_int(rng, 1, 6);
    const MatrixXd vertices = random_points(rng, uniform_int(rng, 1, 6), d);
    const VectorXd u = standard_normal_vector(rng, d);
    const VectorXd v = standard_normal_vector(rng, d);
    const double au = uniform(rng, 0.0, 3.0);
    const double av = uniform(rng, 0.0, 3.0);
    const double scaled = f_tl(vertices, au * u, av * v);
    absorb(r, scaled - std::min(au, av) * f_tl(vertices, u, v) + r.tolerance);
  }
  finish(r);
  return r;
}

CheckReport check_polygon_isometry_suite(int trials, std::uint64_t seed) {
  CheckReport r = make_report("polygon_isometry", 1e-10);
  for (int i = 0; i < trials; ++i) {
    Rng rng = trial_rng(seed, kIdIsometry, static_cast<std::uint64_t>(i));
    const int d = uniform_int(rng, 2, 6);
    const int k = uniform_int(rng, 1, d - 1);
    const MatrixXd basis = random_orthogonal(rng, d);
    const int n = uniform_int(rng, 1, 6);
    // Vertices live in the span of the first k basis vectors.
    const MatrixXd vertices = random_points(rng, n, k) * basis.leftCols(k).transpose();
    const MatrixXd complement = basis.rightCols(d - k);
    const VectorXd u = standard_normal_vector(rng, d);
    const VectorXd v = standard_normal_vector(rng, d);
    const VectorXd u2 = u + complement * standard_normal_vector(rng, d - k) * 3.0;
    const VectorXd v2 = v + complement * standard_normal_vector(rng, d - k) * 3.0;
    absorb(r, r.tolerance - std::abs(f_tl(vertices, u, v) - f_tl(vertices, u2, v2)));
  }
  finish(r);
  return r;
}

double skew(const MatrixXd& vertices, const OrthogonalPair& pair, double beta) {
  double out = 0.0;
  for (Eigen::Index i = 0; i < vertices.rows(); ++i)
    for (Eigen::Index j = i + 1; j < vertices.rows(); ++j) {
      const VectorXd diff = (vertices.row(i) - vertices.row(j)).transpose();
      out = std::max({out, beta * (pair.sigma * diff).norm(), (pair.lambda * diff).norm()});
    }
  return out;
}

OptimalPerimeterResult check_optimal_perimeter(const OptimalPerimeterInstance& in, int samples, Rng& rng,
                                               double c_cor) {
  OptimalPerimeterResult out;
  if (skew(in.vertices, in.pair, in.beta) > in.zeta) {
    out.admissible = false;
    return out;
  }
  const Eigen::Index d = in.vertices.cols();
  const int a_count = static_cast<int>(in.vertices.rows());
  const MidpointResult mp = midpoint(in.vertices, in.phi1, in.phi2, in.pair, in.beta, 1e-9, rng());
  out.midpoint_objective = mp.objective;
  std::vector<double> tl(static_cast<std::size_t>(samples));
  for (int s = 0; s < samples; ++s) {
    const VectorXd u = in.pair.sigma * standard_normal_vector(rng, d);
    const VectorXd v = in.pair.lambda * standard_normal_vector(rng, d);
    tl[s] = f_tl(in.vertices, in.beta * u, v);
  }
  const Mean m = mean_and_se(tl);
  const double factor = std::pow(c_cor / in.eps, 2.0 * a_count);
  out.lhs = factor * m.mean;
  out.lhs_se = factor * m.se;
  out.rhs = mp.objective - 4.0 * in.eps * in.zeta;
  out.pass = out.lhs >= out.rhs - kMcMargin * out.lhs_se;
  return out;
}

CheckReport check_optimal_perimeter_suite(int trials, int samples, std::uint64_t seed) {
  CheckReport r = make_report("optimal_perimeter", kMcMargin);
  std::vector<OptimalPerimeterInstance> instances;
  std::vector<std::uint64_t> ids;
  const std::uint64_t max_attempts = 20ULL * static_cast<std::uint64_t>(std::max(trials, 1));
  for (std::uint64_t i = 0; i < max_attempts && static_cast<int>(instances.size()) < trials; ++i) {
    Rng rng = trial_rng(seed, kIdPerimeter, i);
    OptimalPerimeterInstance in;
    const int d = uniform_int(rng, 2, 6);
    const int a_count = uniform_int(rng, 2, 4);
    in.vertices = random_points(rng, a_count, d);
    in.pair = random_pair(rng, d);
    in.beta = uniform(rng, 1.0, 4.0);
    in.eps = log_uniform(rng, 0.02, 0.5);
    in.zeta = skew(in.vertices, in.pair, in.beta) * uniform(rng, 0.8, 1.5);
    in.phi1 = in.vertices.row(uniform_int(rng, 0, a_count - 1)).transpose();
    in.phi2 = in.vertices.row(uniform_int(rng, 0, a_count - 1)).transpose();
    if (skew(in.vertices, in.pair, in.beta) > in.zeta) {
      ++r.skipped;
      continue;
    }
    instances.push_back(std::move(in));
    ids.push_back(i);
  }
  std::vector<OptimalPerimeterResult> results(instances.size());
  parallel_for(instances.size(), [&](std::size_t k) {
    Rng rng = trial_rng(seed, kIdPerimeter, ids[k], 1);
    results[k] = check_optimal_perimeter(instances[k], samples, rng);
  });
  for (const auto& res : results) absorb(r, res.lhs - res.rhs + kMcMargin * res.lhs_se);
  finish(r);
  if (static_cast<int>(instances.size()) < trials) r.pass = false;
  r.details["admissible"] = static_cast<long>(instances.size());
  r.details["samples"] = samples;
  return r;
}

// ---------------------------------------------------------------------------

CheckReport check_orig_truncated_suite(int trials, std::uint64_t seed) {
  CheckReport r = make_report("orig_truncated", 1e-9);
  double worst_defect = 0.0;
  for (int i = 0; i < trials; ++i) {
    Rng rng = trial_rng(seed, kIdTruncated, static_cast<std::uint64_t>(i));
    const int d = uniform_int(rng, 1, 6);
    const MatrixXd gamma = random_psd(rng, d, log_uniform(rng, 0.1, 10.0));
    const double sigma = log_uniform(rng, 1e-2, 10.0);
    const OrthogonalPair pair = trunc_pair(gamma, sigma);
    worst_defect = std::max(worst_defect, pair_defect(pair));
    const MatrixXd gap = gamma / sigma - pair.sigma;
    absorb(r, min_eigenvalue(0.5 * (gap + gap.transpose())) + r.tolerance);
  }
  finish(r);
  r.details["max_pair_defect"] = worst_defect;
  return r;
}

CheckReport check_bound_truncation_error_suite(int trials, int samples, std::uint64_t seed) {
  CheckReport r = make_report("bound_truncation_error", kMcMargin);
  std::vector<double> slack(static_cast<std::size_t>(trials));
  parallel_for(slack.size(), [&](std::size_t i) {
    Rng rng = trial_rng(seed, kIdTruncationError, i);
    const int d = uniform_int(rng, 1, 6);
    const int a_count = uniform_int(rng, 1, 5);
    const MatrixXd phi = random_points(rng, a_count, d);
    const MatrixXd gamma = random_psd(rng, d, log_uniform(rng, 0.1, 10.0));
    const VectorXd eig = symmetric_eigen(gamma).eigenvalues();
    // Threshold somewhere inside (or just outside) the spectrum.
    const double sigma = std::max(1e-3, eig[uniform_int(rng, 0, d - 1)]) * uniform(rng, 0.5, 1.5);
    const OrthogonalPair pair = trunc_pair(gamma, sigma);
    VectorXd weights(a_count);
    for (int a = 0; a < a_count; ++a) weights[a] = -std::log(std::max(1e-300, uniform01(rng)));
    const VectorXd v = phi.transpose() * (weights / weights.sum());
    const VectorXd pa = phi.row(uniform_int(rng, 0, a_count - 1)).transpose();
    const VectorXd pb = phi.row(uniform_int(rng, 0, a_count - 1)).transpose();
    const double lhs = (gamma * (pa - v)).norm() + (v - pb).norm();
    const McEstimate fn = f_normal(phi, pair.sigma, samples, rng);
    const double rhs = spectral_norm_symmetric(gamma) * (pair.sigma * (pa - v)).norm() +
                       (pair.lambda * (v - pb)).norm() + kSqrt2Pi * fn.mean + 2.0 * sigma;
    slack[i] = rhs + kMcMargin * kSqrt2Pi * fn.std_error - lhs;
  });
  for (double s : slack) absorb(r, s);
  finish(r);
  r.details["samples"] = samples;
  return r;
}

// ---------------------------------------------------------------------------

VectorXd lsvi_clipped_value(const FeatureMdp& mdp, double w) {
  if (mdp.horizon() < 2 || mdp.dim() != 1) throw Error("lsvi_clipped_value: needs a one-dimensional, two-step MDP");
  const double cap = mdp.horizon();
  VectorXd g(mdp.num_states(1));
  for (int x = 0; x < mdp.num_states(1); ++x)
    g[x] = (w * mdp.action_features(1, x).col(0)).cwiseMin(cap).maxCoeff();
  return g;
}

VectorXd max_feature_norm(const FeatureMdp& mdp) {
  if (mdp.horizon() < 2) throw Error("max_feature_norm: needs at least two steps");
  VectorXd g(mdp.num_states(1));
  for (int x = 0; x < mdp.num_states(1); ++x) g[x] = mdp.action_features(1, x).rowwise().norm().maxCoeff();
  return g;
}

CheckReport check_bellman_linearity_suite(const FeatureMdp& mdp, std::uint64_t seed, double tolerance) {
  CheckReport r = make_report("bellman_linearity", tolerance);
  const int d = mdp.dim();
  double worst_max = 0.0, worst_policy = 0.0;
  for (int h = 0; h + 1 < mdp.horizon(); ++h) {
    const int next = h + 1;
    const int s_next = mdp.num_states(next);
    for (int i = 0; i < 100; ++i) {
      Rng rng = trial_rng(seed, kIdBellman, static_cast<std::uint64_t>(h), static_cast<std::uint64_t>(i));
      const VectorXd theta = standard_normal_vector(rng, d);
      VectorXd g(s_next);
      for (int x = 0; x < s_next; ++x) g[x] = (mdp.action_features(next, x) * theta).maxCoeff();
      const double scale = g.cwiseAbs().maxCoeff();
      if (scale > 0.0) g /= scale;
      const BackupFit fit = bellman_backup_residual(mdp, h, g);
      worst_max = std::max(worst_max, fit.max_abs_residual);
      absorb(r, tolerance - fit.max_abs_residual);
    }
    for (int i = 0; i < 100; ++i) {
      Rng rng = trial_rng(seed, kIdBellman, static_cast<std::uint64_t>(h), 1000 + static_cast<std::uint64_t>(i));
      std::vector<VectorXd> w(static_cast<std::size_t>(mdp.horizon()), VectorXd::Zero(d));
      w[next] = standard_normal_vector(rng, d);
      const PolicyPtr pi = make_linear(w);
      ActionLawOptions law;
      law.tie_samples = 100000;
      law.seed = derive_seed(seed, Stream::kCheck, kIdBellman, static_cast<std::uint64_t>(h), 2000 + i);
      MatrixXd g(s_next, d);
      for (int x = 0; x < s_next; ++x)
        g.row(x) = action_distribution(mdp, *pi, next, x, law).transpose() * mdp.action_features(next, x);
      const BackupFitMulti fit = bellman_backup_residual(mdp, h, g);
      worst_policy = std::max(worst_policy, fit.max_abs_residual);
      absorb(r, tolerance - fit.max_abs_residual);
    }
  }

  const FeatureMdp lsvi = make_lsvi_counterexample(true);
  const FeatureMdp quad = make_quadratic_counterexample(true);
  const BackupFit lsvi_fit = bellman_backup_residual(lsvi, 0, lsvi_clipped_value(lsvi, 1.0));
  const BackupFit quad_fit = bellman_backup_residual(quad, 0, max_feature_norm(quad));
  absorb(r, 1e-9 - std::abs(lsvi_fit.sum_squared_residual - 0.8));
  absorb(r, 1e-9 - std::abs(quad_fit.sum_squared_residual - 0.5));
  finish(r);
  r.details["linear_max_max_residual"] = worst_max;
  r.details["linear_policy_max_residual"] = worst_policy;
  r.details["lsvi_ssr"] = lsvi_fit.sum_squared_residual;
  r.details["lsvi_weight"] = lsvi_fit.weights[0];
  r.details["quadratic_ssr"] = quad_fit.sum_squared_residual;
  r.details["quadratic_weight"] = quad_fit.weights[0];
  return r;
}

CheckReport check_policy_q_linearity(const FeatureMdp& mdp, int policies, std::uint64_t seed, double tolerance) {
  CheckReport r = make_report("policy_q_linearity", tolerance);
  const double norm_cap = mdp.horizon() * mdp.norm_bound();
  double worst_residual = 0.0, largest_norm = 0.0;
  for (int i = 0; i < policies; ++i) {
    Rng rng = trial_rng(seed, kIdPolicyQ, static_cast<std::uint64_t>(i));
    std::vector<VectorXd> w;
    for (int h = 0; h < mdp.horizon(); ++h) w.push_back(standard_normal_vector(rng, mdp.dim()));
    ActionLawOptions law;
    law.tie_samples = 100000;
    law.seed = derive_seed(seed, Stream::kCheck, kIdPolicyQ, static_cast<std::uint64_t>(i), 1);
    const QTable q = policy_q(mdp, *make_linear(w), {}, law);
    for (const auto& fit : fit_q_round(mdp, q)) {
      worst_residual = std::max(worst_residual, fit.max_abs_residual);
      largest_norm = std::max(largest_norm, fit.weights.norm());
      absorb(r, std::min(tolerance - fit.max_abs_residual, norm_cap * (1.0 + 1e-9) - fit.weights.norm()));
    }
  }
  finish(r);
  r.details["max_residual"] = worst_residual;
  r.details["max_weight_norm"] = largest_norm;
  r.details["norm_cap"] = norm_cap;
  return r;
}

}  // namespace lbc
