#pragma once

#include <cstddef>
#include <vector>

#include "coalesce/distributions.hpp"
#include "coalesce/random.hpp"

namespace testing {

// Random vector with a few exact zeros mixed in now and then.
inline coalesce::ProbabilityVector random_vector(std::size_t n, coalesce::RandomStream& rng,
                                                 bool allow_zero = false) {
  std::vector<double> w(n);
  for (double& x : w) x = rng.exponential();
  if (allow_zero && n > 2 && rng.uniform() < 0.3) w[rng.below(n)] = 0.0;
  return coalesce::ProbabilityVector::new_checked(std::move(w), true);
}

inline std::vector<double> copy_weights(const coalesce::ProbabilityVector& p) {
  return {p.weights().begin(), p.weights().end()};
}

}  // namespace testing
