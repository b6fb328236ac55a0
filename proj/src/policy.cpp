#include "lbc/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace lbc {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_weights(const std::vector<VectorXd>& w, const FeatureMdp& mdp, const char* what) {
  if (static_cast<int>(w.size()) != mdp.horizon())
    throw Error(std::string(what) + " policy: expected one weight vector per step");
  for (const auto& v : w)
    if (v.size() != mdp.dim()) throw Error(std::string(what) + " policy: weight dimension mismatch");
}

// Lowest index of each group of (numerically) identical feature rows among
// the actions whose score is within the tie tolerance of the maximum.
std::vector<int> tied_representatives(const MatrixXd& features, const VectorXd& w) {
  const VectorXd scores = features * w;
  const double best = scores.maxCoeff();
  const double tol = kTieTolerance * std::max(1.0, scores.cwiseAbs().maxCoeff());
  std::vector<int> reps;
  for (int a = 0; a < scores.size(); ++a) {
    if (scores[a] < best - tol) continue;
    bool duplicate = false;
    for (int r : reps) {
      const double scale = std::max(1.0, features.row(r).norm());
      if ((features.row(a) - features.row(r)).norm() <= 1e-12 * scale) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) reps.push_back(a);
  }
  return reps;
}

int sphere_tie_break(const MatrixXd& features, const std::vector<int>& reps, Rng& rng) {
  if (reps.size() == 1) return reps.front();
  const Eigen::Index d = features.cols();
  for (int attempt = 0; attempt < 64; ++attempt) {
    const VectorXd theta = uniform_sphere(rng, d);
    int best = reps.front();
    double best_score = features.row(best).dot(theta);
    double runner_up = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < reps.size(); ++k) {
      const double s = features.row(reps[k]).dot(theta);
      if (s > best_score) {
        runner_up = best_score;
        best_score = s;
        best = reps[k];
      } else if (s > runner_up) {
        runner_up = s;
      }
    }
    if (best_score - runner_up > 1e-14 * std::max(1.0, std::abs(best_score))) return best;
  }
  return reps.front();
}

bool is_zero(const MatrixXd& m) { return m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0; }

void resolve_range(const Policy& p, int lo, int hi, Rng& rng, std::vector<const Policy*>& out) {
  if (lo >= hi) return;
  if (const auto* c = p.get_if<ComposedPolicy>()) {
    resolve_range(*c->prefix, lo, std::min(hi, c->switch_step), rng, out);
    resolve_range(*c->suffix, std::max(lo, c->switch_step), hi, rng, out);
  } else if (const auto* m = p.get_if<MixturePolicy>()) {
    const auto k = std::uniform_int_distribution<std::size_t>(0, m->components.size() - 1)(rng);
    resolve_range(*m->components[k], lo, hi, rng, out);
  } else {
    for (int h = lo; h < hi; ++h) out[static_cast<std::size_t>(h)] = &p;
  }
}

void expand_range(const Policy& p, int lo, int hi, std::vector<MarkovComponent>& parts) {
  if (lo >= hi) return;
  if (const auto* c = p.get_if<ComposedPolicy>()) {
    expand_range(*c->prefix, lo, std::min(hi, c->switch_step), parts);
    expand_range(*c->suffix, std::max(lo, c->switch_step), hi, parts);
  } else if (const auto* m = p.get_if<MixturePolicy>()) {
    std::vector<MarkovComponent> next;
    const double share = 1.0 / static_cast<double>(m->components.size());
    for (const auto& comp : m->components) {
      std::vector<MarkovComponent> branch = parts;
      for (auto& b : branch) b.weight *= share;
      expand_range(*comp, lo, hi, branch);
      for (auto& b : branch) next.push_back(std::move(b));
    }
    parts = std::move(next);
  } else {
    for (auto& part : parts)
      for (int h = lo; h < hi; ++h) part.steps[static_cast<std::size_t>(h)] = &p;
  }
}

}  // namespace

void Policy::check_compatible(const FeatureMdp& mdp) const {
  std::visit(Overloaded{
                 [&](const LinearPolicy& p) { check_weights(p.weights, mdp, "linear"); },
                 [&](const PerturbedLinearPolicy& p) {
                   check_weights(p.weights, mdp, "perturbed");
                   if (static_cast<int>(p.sigmas.size()) != mdp.horizon())
                     throw Error("perturbed policy: expected one sigma per step");
                   for (double s : p.sigmas)
                     if (!(s >= 0.0)) throw Error("perturbed policy: sigma must be nonnegative");
                 },
                 [&](const UniformRandomPolicy&) {},
                 [&](const GreedyPolicy& p) { check_weights(p.weights, mdp, "greedy"); },
                 [&](const TildeExplorePolicy& p) {
                   if (static_cast<int>(p.covariances.size()) != mdp.horizon())
                     throw Error("tilde policy: expected one covariance per step");
                   for (const auto& c : p.covariances)
                     if (c.rows() != mdp.dim() || c.cols() != mdp.dim())
                       throw Error("tilde policy: covariance dimension mismatch");
                 },
                 [&](const ComposedPolicy& p) {
                   if (!p.prefix || !p.suffix) throw Error("composed policy: null component");
                   p.prefix->check_compatible(mdp);
                   p.suffix->check_compatible(mdp);
                 },
                 [&](const MixturePolicy& p) {
                   if (p.components.empty()) throw Error("mixture policy: no components");
                   for (const auto& c : p.components) {
                     if (!c) throw Error("mixture policy: null component");
                     c->check_compatible(mdp);
                   }
                 },
             },
             v_);
}

PolicyPtr make_linear(std::vector<VectorXd> weights) {
  return std::make_shared<const Policy>(LinearPolicy{std::move(weights)});
}
PolicyPtr make_perturbed(std::vector<VectorXd> weights, std::vector<double> sigmas) {
  return std::make_shared<const Policy>(PerturbedLinearPolicy{std::move(weights), std::move(sigmas)});
}
PolicyPtr make_uniform() { return std::make_shared<const Policy>(UniformRandomPolicy{}); }
PolicyPtr make_greedy(std::vector<VectorXd> weights) {
  return std::make_shared<const Policy>(GreedyPolicy{std::move(weights)});
}
PolicyPtr make_tilde(std::vector<MatrixXd> covariances) {
  return std::make_shared<const Policy>(TildeExplorePolicy{std::move(covariances)});
}
PolicyPtr compose_at(PolicyPtr prefix, PolicyPtr suffix, int switch_step) {
  return std::make_shared<const Policy>(ComposedPolicy{std::move(prefix), std::move(suffix), switch_step});
}
PolicyPtr make_mixture(std::vector<PolicyPtr> components) {
  if (components.empty()) throw Error("mixture policy: no components");
  return std::make_shared<const Policy>(MixturePolicy{std::move(components)});
}

int argmax_lowest(const VectorXd& scores) {
  int best = 0;
  for (int a = 1; a < scores.size(); ++a)
    if (scores[a] > scores[best]) best = a;
  return best;
}

int act_linear(const FeatureMdp& mdp, const VectorXd& w, int h, int x, Rng& rng) {
  const MatrixXd& f = mdp.action_features(h, x);
  return sphere_tie_break(f, tied_representatives(f, w), rng);
}

int act_perturbed(const FeatureMdp& mdp, const VectorXd& w, double sigma, int h, int x, Rng& rng) {
  if (sigma == 0.0) return act_linear(mdp, w, h, x, rng);
  const VectorXd theta = w + sigma * standard_normal_vector(rng, w.size());
  return argmax_lowest(mdp.action_features(h, x) * theta);
}

int act_greedy(const FeatureMdp& mdp, const VectorXd& w, int h, int x) {
  return argmax_lowest(mdp.action_features(h, x) * w);
}

int act_tilde(const FeatureMdp& mdp, const MatrixXd& covariance, int h, int x, Rng& rng) {
  // The covariance is a projection, so S z with z ~ N(0, I) has law N(0, S).
  const VectorXd w = covariance * standard_normal_vector(rng, covariance.cols());
  return act_linear(mdp, w, h, x, rng);
}

int act_step(const FeatureMdp& mdp, const Policy& leaf, int h, int x, Rng& rng) {
  return std::visit(
      Overloaded{
          [&](const LinearPolicy& p) { return act_linear(mdp, p.weights[h], h, x, rng); },
          [&](const PerturbedLinearPolicy& p) { return act_perturbed(mdp, p.weights[h], p.sigmas[h], h, x, rng); },
          [&](const UniformRandomPolicy&) {
            return std::uniform_int_distribution<int>(0, mdp.num_actions() - 1)(rng);
          },
          [&](const GreedyPolicy& p) { return act_greedy(mdp, p.weights[h], h, x); },
          [&](const TildeExplorePolicy& p) { return act_tilde(mdp, p.covariances[h], h, x, rng); },
          [&](const ComposedPolicy&) -> int { throw Error("act_step: composite policy"); },
          [&](const MixturePolicy&) -> int { throw Error("act_step: composite policy"); },
      },
      leaf.variant());
}

std::vector<const Policy*> resolve_episode(const Policy& policy, int horizon, Rng& rng) {
  std::vector<const Policy*> out(static_cast<std::size_t>(horizon), nullptr);
  resolve_range(policy, 0, horizon, rng, out);
  return out;
}

std::vector<MarkovComponent> expand_markov(const Policy& policy, int horizon) {
  std::vector<MarkovComponent> parts(1);
  parts[0].steps.assign(static_cast<std::size_t>(horizon), nullptr);
  expand_range(policy, 0, horizon, parts);
  return parts;
}

VectorXd action_distribution(const FeatureMdp& mdp, const Policy& leaf, int h, int x,
                             const ActionLawOptions& options) {
  const int num_actions = mdp.num_actions();
  VectorXd dist = VectorXd::Zero(num_actions);
  const MatrixXd& f = mdp.action_features(h, x);

  auto estimate = [&](const char* what) {
    if (!options.tie_samples || *options.tie_samples < 1)
      throw Error(std::string("action_distribution: ") + what + " action law requires a tie sample count");
    Rng rng = make_rng(options.seed, Stream::kTieBreak, static_cast<std::uint64_t>(h), static_cast<std::uint64_t>(x));
    const int m = *options.tie_samples;
    for (int i = 0; i < m; ++i) dist[act_step(mdp, leaf, h, x, rng)] += 1.0;
    dist /= static_cast<double>(m);
    return dist;
  };
  auto linear_law = [&](const VectorXd& w) -> VectorXd {
    const auto reps = tied_representatives(f, w);
    if (reps.size() == 1) {
      dist[reps.front()] = 1.0;
      return dist;
    }
    if (reps.size() == 2) {
      dist[reps[0]] = 0.5;
      dist[reps[1]] = 0.5;
      return dist;
    }
    return estimate("multi-way tied linear");
  };

  return std::visit(
      Overloaded{
          [&](const LinearPolicy& p) -> VectorXd { return linear_law(p.weights[h]); },
          [&](const PerturbedLinearPolicy& p) -> VectorXd {
            if (p.sigmas[h] == 0.0) return linear_law(p.weights[h]);
            return estimate("perturbed");
          },
          [&](const UniformRandomPolicy&) -> VectorXd {
            return VectorXd::Constant(num_actions, 1.0 / num_actions);
          },
          [&](const GreedyPolicy& p) -> VectorXd {
            dist[act_greedy(mdp, p.weights[h], h, x)] = 1.0;
            return dist;
          },
          [&](const TildeExplorePolicy& p) -> VectorXd {
            if (is_zero(p.covariances[h])) return linear_law(VectorXd::Zero(mdp.dim()));
            return estimate("tilde-explore");
          },
          [&](const ComposedPolicy&) -> VectorXd { throw Error("action_distribution: composite policy"); },
          [&](const MixturePolicy&) -> VectorXd { throw Error("action_distribution: composite policy"); },
      },
      leaf.variant());
}

}  // namespace lbc
