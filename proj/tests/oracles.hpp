#pragma once

// Independent reference computations used only by the tests. None of these
// share code paths with the library routines they check.

#include <cstddef>
#include <vector>

#include "coalesce/distributions.hpp"
#include "coalesce/exact_chain.hpp"

namespace oracle {

/// Uniform-p row from surjection counts: C(n,b) b! S(k,b) / n^k with exact
/// big-integer Stirling numbers. Requires 1 <= k <= n <= 300.
coalesce::TransitionRow uniform_row(std::size_t n, std::size_t k);

/// Row by enumerating all n^k ball placements. Keep n^k small.
std::vector<double> enumerated_row(const coalesce::ProbabilityVector& p, std::size_t k);

/// E[T(m)], m = 0..n, from a dense Gaussian-elimination solve of
/// (I - Q) t = 1 over the transient states 2..n, with rows[k][b] = pi_kb.
std::vector<double> dense_expected_times(const std::vector<std::vector<double>>& rows);

/// sup |F_a - F_b| by evaluating both empirical CDFs at every sample point.
double ks_quadratic(const std::vector<double>& a, const std::vector<double>& b);

/// Determinant by Gaussian elimination with partial pivoting.
long double determinant(std::vector<std::vector<long double>> m);

/// sum_j exp(-k q_j)
double proxy(const std::vector<double>& q, double k);

}  // namespace oracle
