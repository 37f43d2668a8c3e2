#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace l2d {

// Score clipping bound: keeps ratio-form embeddings finite.
inline constexpr double kEpsProb = 1e-6;
// Tie tolerance for argmax-set detection at breakpoint-exact evaluation.
inline constexpr double kEpsTie = 1e-12;
// Left-limit probe offset for the constraint curve.
inline constexpr double kEpsProbe = 1e-8;
// Jump threshold below which randomization is skipped.
inline constexpr double kMinJump = 1e-3;

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Raised when the feasibility set of a solve is empty; carries the best
// achievable constraint value for diagnostics.
struct NotFeasible : Error {
  std::vector<double> min_achievable;
  explicit NotFeasible(const std::string& what, std::vector<double> achievable = {})
      : Error(what), min_achievable(std::move(achievable)) {}
};

inline double clip_prob(double v) {
  if (v < kEpsProb) return kEpsProb;
  if (v > 1.0 - kEpsProb) return 1.0 - kEpsProb;
  return v;
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return Rng(mix_seed(seed, stream));
}

// Probability vector over the d = L+1 outcomes; index L is the defer mass.
struct SimplexVector {
  std::vector<double> weights;

  int size() const { return static_cast<int>(weights.size()); }
  double defer_mass() const { return weights.back(); }

  bool valid(double tol = 1e-9) const {
    double sum = 0.0;
    for (double w : weights) {
      if (w < -tol || w > 1.0 + tol) return false;
      sum += w;
    }
    return std::abs(sum - 1.0) <= tol;
  }

  double dot(const double* psi) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) acc += weights[i] * psi[i];
    return acc;
  }
};

struct DeferralDecision {
  bool deferred = false;
  int predicted_class = 0;  // meaningful only when !deferred
};

}  // namespace l2d
