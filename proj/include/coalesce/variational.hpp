#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "coalesce/distributions.hpp"
#include "coalesce/random.hpp"

namespace coalesce {

/// Best point found by a constrained random search for the minimum of
/// F(q) = sum_j exp(-k q_j).
struct SearchResult {
  ProbabilityVector best;
  double value;
  std::size_t evaluations;
};

/// Search over {q : sum q = 1, sum q^2 = c2}. Restarts are drawn with
/// sample_with_collision and refined by three-coordinate moves that keep both
/// power sums fixed. `budget` counts candidate evaluations. Restarts are
/// independent streams derived from one draw of `rng`, so the result does not
/// depend on `threads`.
SearchResult minimize_over_collision_class(std::size_t n, double c2, double k, std::size_t budget,
                                           RandomStream& rng, std::size_t threads = 0);

/// Search over {q : sum q = 1, sum q^2 = c2(start), sum q^3 = c3(start)}
/// starting from `start` (n >= 4). Moves perturb four coordinates and solve
/// for three of them from their power sums, so every iterate stays on the
/// constraint set up to rounding.
SearchResult minimize_over_moment_class(const ProbabilityVector& start, double k,
                                        std::size_t budget, RandomStream& rng,
                                        std::size_t threads = 0);

/// F_p >= min over feasible nu of F_r >= F_theta >= F_u, where theta is the
/// topheavy vector and r the three-level vectors with the moments of p.
struct OrderingReport {
  double k;
  double f_p;
  double f_topheavy;
  double f_uniform;
  std::vector<std::pair<std::size_t, double>> three_level;  ///< (nu, F_r) for feasible nu
  std::optional<std::size_t> best_nu;
  std::optional<double> f_three_level;  ///< min over feasible nu
  bool ordered;
};

OrderingReport ordering_chain(const ProbabilityVector& p, double k, std::size_t nu_min,
                              std::size_t nu_max, double tolerance = 1e-9);

/// det of the 4x4 matrix with rows (exp(-x_i), 1, x_i, x_i^2), x1 > x2 > x3 > x4 >= 0.
long double case1_determinant(double x1, double x2, double x3, double x4);

/// -(x-x4)^2 e^{-x1} + (D - (x1-x4)(x1+x4-2x)) e^{-x} + (x-x1)^2 e^{-x4}
/// with D = (x-x1)(x4-x1)(x4-x), for x1 > x > x4 >= 0.
long double case2_T(double x1, double x, double x4);

/// Number of clusters of the sorted entries, joining neighbours closer than `gap`.
std::size_t distinct_levels(const ProbabilityVector& q, double gap = 1e-6);

nlohmann::json search_to_json(const SearchResult& r, double reference);
nlohmann::json ordering_to_json(const OrderingReport& r);

}  // namespace coalesce
