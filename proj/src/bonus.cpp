#include "lbc/bonus.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>

namespace lbc {

namespace {

const double kSqrt2Pi = std::sqrt(2.0 * std::numbers::pi);

double column_antithetic_mean(const MatrixXd& scores) {
  if (scores.cols() == 0) return 0.0;
  return 0.5 * (scores.colwise().maxCoeff() - scores.colwise().minCoeff()).mean();
}

}  // namespace

double pair_defect(const OrthogonalPair& p) {
  const Eigen::Index d = p.sigma.rows();
  const MatrixXd id = MatrixXd::Identity(d, d);
  double worst = (p.sigma * p.sigma - p.sigma).norm();
  worst = std::max(worst, (p.lambda * p.lambda - p.lambda).norm());
  worst = std::max(worst, (p.sigma * p.lambda).norm());
  worst = std::max(worst, (p.lambda * p.sigma).norm());
  worst = std::max(worst, (p.sigma + p.lambda - id).norm());
  return worst;
}

OrthogonalPair trunc_pair(const MatrixXd& gamma, double sigma) {
  if (gamma.rows() != gamma.cols()) throw Error("trunc_pair: matrix is not square");
  if (!(sigma > 0.0)) throw Error("trunc_pair: threshold must be positive");
  if (asymmetry(gamma) > 1e-8) throw Error("trunc_pair: matrix is not symmetric");
  const auto es = symmetric_eigen(gamma);
  const Eigen::Index d = gamma.rows();
  VectorXd plus(d);
  for (Eigen::Index i = 0; i < d; ++i) plus[i] = es.eigenvalues()[i] >= sigma ? 1.0 : 0.0;
  const MatrixXd& u = es.eigenvectors();
  OrthogonalPair out;
  out.sigma = u * plus.asDiagonal() * u.transpose();
  out.lambda = u * (VectorXd::Ones(d) - plus).asDiagonal() * u.transpose();
  return out;
}

double f_tl(const MatrixXd& vertices, const VectorXd& u, const VectorXd& v) {
  if (vertices.rows() == 0) throw Error("f_tl: empty vertex set");
  const VectorXd su = vertices * u;
  const VectorXd sv = vertices * v;
  // Scoring u + v as su + sv keeps the result >= 0 in floating point:
  // rounding is monotone, so fl(su_a + sv_a) <= fl(max su + max sv).
  return (su.maxCoeff() + sv.maxCoeff()) - (su + sv).maxCoeff();
}

McEstimate f_normal(const MatrixXd& vertices, const MatrixXd& cov, int samples, Rng& rng) {
  if (samples < 1) throw Error("f_normal: sample count must be positive");
  const MatrixXd root = psd_sqrt(cov);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < samples; ++i) {
    const VectorXd w = root * standard_normal_vector(rng, cov.cols());
    const double m = (vertices * w).maxCoeff();
    sum += m;
    sum_sq += m * m;
  }
  McEstimate e;
  e.samples = samples;
  e.mean = sum / samples;
  const double var = samples > 1 ? std::max(0.0, (sum_sq - samples * e.mean * e.mean) / (samples - 1)) : 0.0;
  e.std_error = std::sqrt(var / samples);
  return e;
}

double b_quad(const VectorXd& phi, const MatrixXd& sigma) {
  const double q = phi.dot(sigma * phi);
  if (q < -1e-12) throw Error("b_quad: matrix is not PSD along the given direction");
  return std::sqrt(std::max(0.0, q));
}

double midpoint_objective(const VectorXd& xi, const VectorXd& phi1, const VectorXd& phi2,
                          const OrthogonalPair& pair, double beta) {
  return (beta * (pair.sigma * (phi1 - xi))).norm() + (pair.lambda * (xi - phi2)).norm();
}

namespace {

struct SmoothedObjective {
  const MatrixXd& vertices;
  const VectorXd& phi1;
  const VectorXd& phi2;
  MatrixXd bs;  // beta * S
  const MatrixXd& l;

  double value(const VectorXd& weights, double s) const {
    const VectorXd xi = vertices.transpose() * weights;
    const VectorXd a = bs * (phi1 - xi);
    const VectorXd b = l * (xi - phi2);
    return std::sqrt(a.squaredNorm() + s * s) + std::sqrt(b.squaredNorm() + s * s);
  }

  VectorXd gradient(const VectorXd& weights, double s) const {
    const VectorXd xi = vertices.transpose() * weights;
    const VectorXd a = bs * (phi1 - xi);
    const VectorXd b = l * (xi - phi2);
    const VectorXd gxi = -bs.transpose() * a / std::sqrt(a.squaredNorm() + s * s) +
                         l.transpose() * b / std::sqrt(b.squaredNorm() + s * s);
    return vertices * gxi;
  }
};

double golden_section(const std::function<double(double)>& f, double lo, double hi) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 100 && b - a > 1e-16 * std::max(1.0, hi); ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  double best = 0.5 * (a + b);
  double fbest = f(best);
  for (double cand : {lo, hi}) {
    const double fc2 = f(cand);
    if (fc2 < fbest) {
      fbest = fc2;
      best = cand;
    }
  }
  return best;
}

// Pairwise Frank-Wolfe at one smoothing level. Returns the final FW gap.
double pairwise_fw(const SmoothedObjective& obj, VectorXd& weights, double s, double tol, int max_iter) {
  double gap = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    const VectorXd g = obj.gradient(weights, s);
    Eigen::Index toward = 0;
    g.minCoeff(&toward);
    Eigen::Index away = -1;
    for (Eigen::Index i = 0; i < weights.size(); ++i)
      if (weights[i] > 0.0 && (away < 0 || g[i] > g[away])) away = i;
    gap = g.dot(weights) - g[toward];
    if (gap <= tol || away == toward) break;
    const double max_step = weights[away];
    auto line = [&](double gamma) {
      VectorXd trial = weights;
      trial[toward] += gamma;
      trial[away] -= gamma;
      return obj.value(trial, s);
    };
    const double step = golden_section(line, 0.0, max_step);
    if (step <= 0.0) break;
    weights[toward] += step;
    weights[away] -= step;
    if (weights[away] < 1e-15) weights[away] = 0.0;
    weights = weights.cwiseMax(0.0);
    weights /= weights.sum();
  }
  return gap;
}

}  // namespace

MidpointResult midpoint(const MatrixXd& vertices, const VectorXd& phi1, const VectorXd& phi2,
                        const OrthogonalPair& pair, double beta, double tol, std::uint64_t seed) {
  const Eigen::Index n = vertices.rows();
  if (n == 0) throw Error("midpoint: empty vertex set");
  SmoothedObjective obj{vertices, phi1, phi2, beta * pair.sigma, pair.lambda};

  std::vector<VectorXd> starts;
  starts.push_back(VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
  Rng rng = make_rng(seed, Stream::kCheck, 0x6d6964ULL);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  for (int r = 0; r < 10; ++r) {
    VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = gamma(rng);
    starts.push_back(w / w.sum());
  }

  MidpointResult best;
  best.objective = std::numeric_limits<double>::infinity();
  for (const auto& start : starts) {
    VectorXd weights = start;
    double gap = 0.0;
    for (double s : {1e-3, 1e-5, 1e-7, 1e-9}) gap = pairwise_fw(obj, weights, s, std::max(tol * 0.1, 1e-14), 2000);
    const VectorXd xi = vertices.transpose() * weights;
    const double value = midpoint_objective(xi, phi1, phi2, pair, beta);
    if (value < best.objective) {
      best.objective = value;
      best.point = xi;
      best.weights = weights;
      best.converged = gap <= std::max(tol, 1e-6);
    }
  }
  return best;
}

double Constants::sigmap_constant(int num_actions) const {
  if (c_sb) return *c_sb;
  return c_cor * std::pow(6.0 * kSqrt2Pi, 1.0 / (2.0 * num_actions));
}

std::string to_string(ParamMode mode) { return mode == ParamMode::kTheoretical ? "theoretical" : "practical"; }

ParamMode param_mode_from_string(const std::string& s) {
  if (s == "theoretical") return ParamMode::kTheoretical;
  if (s == "practical") return ParamMode::kPractical;
  throw Error("unknown parameter mode '" + s + "' (expected theoretical or practical)");
}

double ParamSet::c_tl() const { return lambda1 * std::pow(constants.c_cor / eps_apx, 2.0 * num_actions); }
double ParamSet::c_n() const { return 2.0 * kSqrt2Pi * lambda1 * xi; }

namespace {

void check_inputs(double eps_final, double delta, int d, int num_actions, int horizon, double norm_bound) {
  if (!(eps_final > 0.0 && eps_final < 1.0)) throw Error("params: eps_final must lie in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) throw Error("params: delta must lie in (0, 1)");
  if (d < 1 || num_actions < 1 || horizon < 1) throw Error("params: d, A, H must be positive");
  if (!(norm_bound > 0.0)) throw Error("params: B must be positive");
}

}  // namespace

ParamSet theoretical_params(double eps_final, double delta, int d, int num_actions, int horizon, double norm_bound,
                            const Constants& constants, std::optional<int> run_rounds,
                            std::optional<int> run_samples, int max_samples) {
  check_inputs(eps_final, delta, d, num_actions, horizon, norm_bound);
  ParamSet p;
  p.mode = ParamMode::kTheoretical;
  p.eps_final = eps_final;
  p.delta = delta;
  p.dim = d;
  p.num_actions = num_actions;
  p.horizon = horizon;
  p.norm_bound = norm_bound;
  p.constants = constants;

  const double H = horizon, A = num_actions, B = norm_bound, D = d;
  const double log_arg = std::log(H * A * B * D / (eps_final * delta));
  if (!(log_arg > 0.0)) throw Error("params: log(HABd / (eps delta)) must be positive");
  const double base = constants.c_thm * std::pow(H, 4) * std::pow(B, 3) * D * std::sqrt(A) * std::sqrt(log_arg) / eps_final;
  p.rounds = run_rounds ? static_cast<double>(*run_rounds) : D * std::pow(base, 6.0 * A + 2.0);
  p.samples_per_phase = run_samples ? static_cast<double>(*run_samples) : 3.0 * p.rounds;
  p.lambda = constants.c_psd * D * std::log(2.0 * p.rounds * H * p.samples_per_phase / delta);
  p.iota = std::log(p.rounds * H * (p.lambda * D + p.samples_per_phase) / delta);
  p.lambda1 = B * H;
  p.eps_bkup = eps_final / (2.0 * H);
  p.sigma_tr = p.eps_bkup / (4.0 * p.lambda1);
  p.eps_apx = p.eps_bkup / (128.0 * kSqrt2Pi * constants.c_reg * p.lambda1 * p.lambda1 * H * B * D * std::sqrt(p.iota));
  const double reg = 4.0 * constants.c_reg * H * B * std::sqrt(D * p.iota);
  p.beta = reg * 5.0 * p.lambda1 * std::sqrt(D) * std::pow(constants.c_cor / p.eps_apx, 2.0 * A);
  p.xi = p.beta / (reg * 2.0 * kSqrt2Pi * p.lambda1 * std::sqrt(D));
  if (!std::isfinite(p.rounds) || !std::isfinite(p.beta) || !std::isfinite(p.lambda))
    throw Error("params: parameter schedule overflows double precision");
  if (!(p.lambda >= 1.0)) throw Error("params: lambda must be at least 1");
  if (!(p.xi >= 1.0)) throw Error("params: xi < 1");

  const double wanted = std::ceil(std::log(p.rounds / delta) / (p.eps_apx * p.eps_apx));
  const int count = wanted > static_cast<double>(max_samples) ? max_samples : std::max(1, static_cast<int>(wanted));
  p.samples_capped = wanted > static_cast<double>(max_samples);
  p.m_tl = count;
  p.m_n = count;
  return p;
}

ParamSet practical_params(int d, int num_actions, int horizon, double norm_bound, int run_rounds, int run_samples,
                          const PracticalOptions& o, const Constants& constants) {
  check_inputs(o.eps_final, o.delta, d, num_actions, horizon, norm_bound);
  if (run_rounds < 1 || run_samples < 1) throw Error("params: T and n must be positive");
  if (!(o.beta > 0.0)) throw Error("params: beta must be positive");
  if (!(o.lambda >= 1.0)) throw Error("params: lambda must be at least 1");
  if (!(o.explored_threshold > 0.0)) throw Error("params: explored threshold must be positive");
  ParamSet p;
  p.mode = ParamMode::kPractical;
  p.eps_final = o.eps_final;
  p.delta = o.delta;
  p.dim = d;
  p.num_actions = num_actions;
  p.horizon = horizon;
  p.norm_bound = norm_bound;
  p.constants = constants;
  p.rounds = run_rounds;
  p.samples_per_phase = run_samples;
  p.lambda = o.lambda;
  p.iota = std::log(p.rounds * horizon * (p.lambda * d + p.samples_per_phase) / o.delta);
  p.lambda1 = o.lambda1.value_or(norm_bound * horizon);
  p.eps_bkup = o.eps_final / (2.0 * horizon);
  p.sigma_tr = o.sigma_tr.value_or(o.beta / (p.lambda1 * std::sqrt(o.explored_threshold)));
  p.eps_apx = constants.c_cor;
  p.beta = o.beta;
  p.xi = 1.0;
  p.m_tl = o.m_tl;
  p.m_n = o.m_n;
  if (!(p.sigma_tr > 0.0)) throw Error("params: sigma_tr must be positive");
  if (p.m_tl < 1 || p.m_n < 1) throw Error("params: sample counts must be positive");
  return p;
}

nlohmann::json params_to_json(const ParamSet& p) {
  nlohmann::json j;
  j["mode"] = to_string(p.mode);
  j["eps_final"] = p.eps_final;
  j["delta"] = p.delta;
  j["d"] = p.dim;
  j["A"] = p.num_actions;
  j["H"] = p.horizon;
  j["B"] = p.norm_bound;
  j["C_psd"] = p.constants.c_psd;
  j["C_thm"] = p.constants.c_thm;
  j["C_reg"] = p.constants.c_reg;
  j["C_cor"] = p.constants.c_cor;
  j["C_sb"] = p.constants.sigmap_constant(p.num_actions);
  j["lambda"] = p.lambda;
  j["T"] = p.rounds;
  j["n"] = p.samples_per_phase;
  j["iota"] = p.iota;
  j["lambda_1"] = p.lambda1;
  j["eps_bkup"] = p.eps_bkup;
  j["sigma_tr"] = p.sigma_tr;
  j["eps_apx"] = p.eps_apx;
  j["beta"] = p.beta;
  j["xi"] = p.xi;
  j["c_tl"] = p.c_tl();
  j["c_n"] = p.c_n();
  j["M_tl"] = p.m_tl;
  j["M_n"] = p.m_n;
  j["samples_capped"] = p.samples_capped;
  return j;
}

FrozenBonus::FrozenBonus(int step, OrthogonalPair pair, double beta, double c_tl, double c_n, MatrixXd u,
                         MatrixXd v, MatrixXd w)
    : step_(step),
      pair_(std::move(pair)),
      beta_(beta),
      c_tl_(c_tl),
      c_n_(c_n),
      u_(std::move(u)),
      v_(std::move(v)),
      w_(std::move(w)) {
  if (u_.cols() != v_.cols()) throw Error("FrozenBonus: u and v sample counts differ");
}

std::pair<double, double> FrozenBonus::eval_terms(const MatrixXd& phi) const {
  double tl = 0.0;
  if (u_.cols() > 0) {
    const MatrixXd bu = beta_ * u_;
    const MatrixXd su = phi * bu;
    const MatrixXd sv = phi * v_;
    tl = ((su.colwise().maxCoeff() + sv.colwise().maxCoeff()) - (su + sv).colwise().maxCoeff()).mean();
  }
  return {c_tl_ * tl, c_n_ * gaussian_max(phi)};
}

double antithetic_max(const VectorXd& scores) {
  if (scores.size() == 0) return 0.0;
  return 0.5 * (scores.maxCoeff() - scores.minCoeff());
}

double FrozenBonus::gaussian_max(const MatrixXd& phi) const { return column_antithetic_mean(phi * w_); }

double FrozenBonus::eval(const MatrixXd& phi) const {
  const auto [a, b] = eval_terms(phi);
  return a + b + offset_;
}

FrozenBonus FrozenBonus::constant(int step, OrthogonalPair pair, double value) {
  const Eigen::Index d = pair.sigma.rows();
  FrozenBonus b(step, std::move(pair), 0.0, 0.0, 0.0, MatrixXd(d, 0), MatrixXd(d, 0), MatrixXd(d, 0));
  b.offset_ = value;
  return b;
}

VectorXd FrozenBonus::eval_states(const FeatureMdp& mdp) const {
  VectorXd out(mdp.num_states(step_));
  for (int x = 0; x < mdp.num_states(step_); ++x) out[x] = eval(mdp.action_features(step_, x));
  return out;
}

nlohmann::json matrix_to_json(const MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error("matrix: expected an array of rows");
  if (j.empty()) return MatrixXd(0, 0);
  const std::size_t cols = j[0].size();
  MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw Error("matrix: ragged rows");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
  }
  return m;
}

nlohmann::json vector_to_json(const VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

VectorXd vector_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error("vector: expected an array");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

nlohmann::json FrozenBonus::to_json() const {
  nlohmann::json j;
  j["step"] = step_ + 1;
  j["beta"] = beta_;
  j["c_tl"] = c_tl_;
  j["c_n"] = c_n_;
  j["sigma_prime"] = matrix_to_json(pair_.sigma);
  j["lambda_prime"] = matrix_to_json(pair_.lambda);
  j["u"] = matrix_to_json(u_.transpose());
  j["v"] = matrix_to_json(v_.transpose());
  j["w"] = matrix_to_json(w_.transpose());
  j["offset"] = offset_;
  return j;
}

FrozenBonus FrozenBonus::from_json(const nlohmann::json& j) {
  OrthogonalPair pair{matrix_from_json(j.at("sigma_prime")), matrix_from_json(j.at("lambda_prime"))};
  const Eigen::Index d = pair.sigma.rows();
  auto samples = [&](const char* key) {
    MatrixXd m = matrix_from_json(j.at(key));
    if (m.size() == 0) return MatrixXd(d, 0);
    return MatrixXd(m.transpose());
  };
  FrozenBonus b(j.at("step").get<int>() - 1, std::move(pair), j.at("beta").get<double>(), j.at("c_tl").get<double>(),
                j.at("c_n").get<double>(), samples("u"), samples("v"), samples("w"));
  b.offset_ = j.value("offset", 0.0);
  return b;
}

FrozenBonus make_bonus_from_pair(const OrthogonalPair& pair, const ParamSet& params, int h, Rng& rng) {
  const Eigen::Index d = pair.sigma.rows();
  MatrixXd u(d, params.m_tl), v(d, params.m_tl), w(d, params.m_n);
  for (int i = 0; i < params.m_tl; ++i) u.col(i) = pair.sigma * standard_normal_vector(rng, d);
  for (int i = 0; i < params.m_tl; ++i) v.col(i) = pair.lambda * standard_normal_vector(rng, d);
  for (int i = 0; i < params.m_n; ++i) w.col(i) = pair.sigma * standard_normal_vector(rng, d);
  return FrozenBonus(h, pair, params.beta, params.c_tl(), params.c_n(), std::move(u), std::move(v), std::move(w));
}

OrthogonalPair covariance_pair(const MatrixXd& cov, const ParamSet& params) {
  if (min_eigenvalue(cov) < 1.0 - 1e-12) throw Error("make_bonus: covariance has an eigenvalue below 1");
  const MatrixXd root = inverse_sqrt(cov);
  const MatrixXd gamma = (params.beta / params.lambda1) * (0.5 * (root + root.transpose()));
  return trunc_pair(gamma, params.sigma_tr);
}

FrozenBonus make_bonus(const MatrixXd& cov, const ParamSet& params, int h, Rng& rng) {
  return make_bonus_from_pair(covariance_pair(cov, params), params, h, rng);
}

}  // namespace lbc
