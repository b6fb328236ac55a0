#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace lbc {

/// Random engine used everywhere in the library.
using Rng = std::mt19937_64;

/// Identifies the consumer of a derived stream. Values are part of the
/// reproducibility contract and must never be renumbered.
enum class Stream : std::uint64_t {
  kRollout = 1,
  kBonus = 2,
  kEnvGen = 3,
  kProbe = 4,
  kTieBreak = 5,
  kMonteCarlo = 6,
  kCheck = 7,
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based stream split. The child seed is
///   mix(mix(mix(mix(mix(master) ^ component) ^ t) ^ h) ^ i)
/// so any (component, t, h, i) tuple gets an independent engine without
/// sequential state. Runs are reproducible regardless of thread schedule.
constexpr std::uint64_t derive_seed(std::uint64_t master, Stream component, std::uint64_t t = 0,
                                    std::uint64_t h = 0, std::uint64_t i = 0) {
  std::uint64_t s = mix64(master);
  s = mix64(s ^ static_cast<std::uint64_t>(component));
  s = mix64(s ^ t);
  s = mix64(s ^ h);
  s = mix64(s ^ i);
  return s;
}

inline Rng make_rng(std::uint64_t master, Stream component, std::uint64_t t = 0,
                    std::uint64_t h = 0, std::uint64_t i = 0) {
  return Rng(derive_seed(master, component, t, h, i));
}

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return n(rng);
}

inline Eigen::VectorXd standard_normal_vector(Rng& rng, Eigen::Index d) {
  Eigen::VectorXd z(d);
  for (Eigen::Index i = 0; i < d; ++i) z[i] = standard_normal(rng);
  return z;
}

/// Uniform direction on S^{d-1}.
inline Eigen::VectorXd uniform_sphere(Rng& rng, Eigen::Index d) {
  for (;;) {
    Eigen::VectorXd z = standard_normal_vector(rng, d);
    const double n = z.norm();
    if (n > 1e-300) return z / n;
  }
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

/// Draws an index from a discrete distribution by inverse CDF.
template <typename Probabilities>
int sample_index(Rng& rng, const Probabilities& p) {
  const double u = uniform01(rng);
  double acc = 0.0;
  const int n = static_cast<int>(p.size());
  int last_positive = 0;
  for (int k = 0; k < n; ++k) {
    if (p[k] > 0.0) last_positive = k;
    acc += p[k];
    if (u < acc) return k;
  }
  return last_positive;
}

}  // namespace lbc
