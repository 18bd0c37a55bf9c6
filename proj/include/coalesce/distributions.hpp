#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "coalesce/random.hpp"

namespace coalesce {

/// A run of identical weights in the sorted (nonincreasing) view.
struct WeightRun {
  double value;
  std::size_t multiplicity;
};

/// Allocation law over n >= 2 boxes. Immutable after construction.
class ProbabilityVector {
 public:
  /// Validates and stores `weights`. With `normalize`, weights are divided by
  /// their sum; otherwise the sum must already be within 1e-9 of one.
  static ProbabilityVector new_checked(std::vector<double> weights, bool normalize = false);

  static ProbabilityVector uniform(std::size_t n);

  std::size_t size() const noexcept { return weights_.size(); }
  std::span<const double> weights() const noexcept { return weights_; }
  double operator[](std::size_t j) const noexcept { return weights_[j]; }

  /// Copy of the weights in nonincreasing order; stored order is untouched.
  std::vector<double> sorted_descending() const;

  /// Run-length view of the sorted weights (exact equality). Uniform and
  /// topheavy vectors compress to one and two runs respectively.
  std::vector<WeightRun> runs() const;

  /// Number of strictly positive entries.
  std::size_t support_size() const noexcept;

 private:
  explicit ProbabilityVector(std::vector<double> weights) : weights_(std::move(weights)) {}

  std::vector<double> weights_;
};

/// Collision moments: c2 = sum p^2 (pair), c3 = sum p^3 (triple).
struct Moments {
  double c2;
  double c3;
};

Moments moments(const ProbabilityVector& p) noexcept;

/// Two-valued vector (theta1, theta2, ..., theta2) with a single large entry and
/// sum of squares c2. Requires 1/n <= c2 <= 1.
ProbabilityVector topheavy(std::size_t n, double c2);

/// Three-level vector r1 (x nu) >= r2 (x 1) >= r3 (x n-nu-1) with the given
/// second and third power sums. Requires 1 <= nu <= n-2. Throws
/// ValidationError when no vector of that shape exists.
ProbabilityVector three_level(std::size_t n, double c2, double c3, std::size_t nu);

/// Every three-level vector with multiplicity nu for the top level; the cube
/// constraint can have more than one solution. Ordered by middle value.
std::vector<ProbabilityVector> three_level_all(std::size_t n, double c2, double c3,
                                               std::size_t nu);

/// Flat Dirichlet draw on the simplex.
ProbabilityVector random_simplex(std::size_t n, RandomStream& rng);

/// Random point with sum of squares c2: a flat simplex draw moved along the
/// segment toward the uniform vector (if it is too spread) or toward the
/// vertex of its largest entry (if it is too even) until the target is hit.
ProbabilityVector sample_with_collision(std::size_t n, double c2, RandomStream& rng);

}  // namespace coalesce
