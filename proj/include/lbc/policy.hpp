#pragma once

#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "lbc/mdp.hpp"
#include "lbc/rng.hpp"

namespace lbc {

/// Relative tolerance used to decide that two linear scores are tied.
inline constexpr double kTieTolerance = 1e-10;

class Policy;
using PolicyPtr = std::shared_ptr<const Policy>;

/// Argmax of <w_h, phi_h(x, .)>, ties resolved by a uniform random direction.
struct LinearPolicy {
  std::vector<VectorXd> weights;
};

/// Argmax under theta ~ N(w_h, sigma_h^2 I).
struct PerturbedLinearPolicy {
  std::vector<VectorXd> weights;
  std::vector<double> sigmas;
};

struct UniformRandomPolicy {};

/// Argmax of <w_h, phi_h(x, .)> with lowest-index tie-break (deterministic).
struct GreedyPolicy {
  std::vector<VectorXd> weights;
};

/// Argmax under w ~ N(0, S_h) where S_h is the explored-direction projection.
struct TildeExplorePolicy {
  std::vector<MatrixXd> covariances;
};

/// Acts as `prefix` at steps < switch_step and as `suffix` at steps >= switch_step.
struct ComposedPolicy {
  PolicyPtr prefix;
  PolicyPtr suffix;
  int switch_step = 0;
};

/// Uniform mixture: one component is drawn at the start of each episode.
struct MixturePolicy {
  std::vector<PolicyPtr> components;
};

class Policy {
 public:
  using Variant = std::variant<LinearPolicy, PerturbedLinearPolicy, UniformRandomPolicy, GreedyPolicy,
                               TildeExplorePolicy, ComposedPolicy, MixturePolicy>;

  explicit Policy(Variant v) : v_(std::move(v)) {}

  const Variant& variant() const { return v_; }
  bool is_composite() const {
    return std::holds_alternative<ComposedPolicy>(v_) || std::holds_alternative<MixturePolicy>(v_);
  }
  template <typename T>
  const T* get_if() const {
    return std::get_if<T>(&v_);
  }

  /// Throws if per-step parameters do not match the MDP dimensions.
  void check_compatible(const FeatureMdp& mdp) const;

 private:
  Variant v_;
};

PolicyPtr make_linear(std::vector<VectorXd> weights);
PolicyPtr make_perturbed(std::vector<VectorXd> weights, std::vector<double> sigmas);
PolicyPtr make_uniform();
PolicyPtr make_greedy(std::vector<VectorXd> weights);
PolicyPtr make_tilde(std::vector<MatrixXd> covariances);
PolicyPtr compose_at(PolicyPtr prefix, PolicyPtr suffix, int switch_step);
PolicyPtr make_mixture(std::vector<PolicyPtr> components);

/// Index of the maximal entry, lowest index on exact ties.
int argmax_lowest(const VectorXd& scores);

int act_linear(const FeatureMdp& mdp, const VectorXd& w, int h, int x, Rng& rng);
int act_perturbed(const FeatureMdp& mdp, const VectorXd& w, double sigma, int h, int x, Rng& rng);
int act_greedy(const FeatureMdp& mdp, const VectorXd& w, int h, int x);
int act_tilde(const FeatureMdp& mdp, const MatrixXd& covariance, int h, int x, Rng& rng);

/// A deterministic-per-episode selection of non-composite policies, one per step.
struct MarkovComponent {
  double weight = 1.0;
  std::vector<const Policy*> steps;
};

/// Draws the episode-level randomness (mixture components) of `policy`.
/// Composite nodes are resolved recursively; steps outside a node's active
/// range never consume randomness.
std::vector<const Policy*> resolve_episode(const Policy& policy, int horizon, Rng& rng);

/// Expands `policy` into its exact weighted list of Markov components.
std::vector<MarkovComponent> expand_markov(const Policy& policy, int horizon);

/// Samples an action from a non-composite policy at (h, x).
int act_step(const FeatureMdp& mdp, const Policy& leaf, int h, int x, Rng& rng);

struct ActionLawOptions {
  /// Sphere/Gaussian draws used for action laws that have no closed form.
  std::optional<int> tie_samples;
  std::uint64_t seed = 0;
};

/// Action distribution of a non-composite policy at (h, x). Closed form for
/// uniform, greedy, and linear policies whose tie set has at most two
/// distinct feature vectors. Perturbed (sigma > 0), tilde-explore, and
/// larger linear tie sets are estimated with `tie_samples` draws and throw
/// lbc::Error when it is absent.
VectorXd action_distribution(const FeatureMdp& mdp, const Policy& leaf, int h, int x,
                             const ActionLawOptions& options = {});

}  // namespace lbc
