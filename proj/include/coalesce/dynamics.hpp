#pragma once

#include <cstddef>
#include <vector>

#include "coalesce/distributions.hpp"

namespace coalesce {

// Deterministic one-step maps of the ball-count chain. All maps accept
// real-valued ball counts.

/// F(k) = sum_j exp(-k p_j): Poisson proxy for the expected number of empty boxes.
double empty_proxy(const ProbabilityVector& p, double k);

/// Phi(k) = n - F(k) = sum_j (1 - exp(-k p_j)): predicted next ball count.
double occupancy_predictor(const ProbabilityVector& p, double k);

/// Exact conditional mean E[B(t+1) | B(t) = k] = sum_j (1 - (1 - p_j)^k).
double expected_next(const ProbabilityVector& p, std::size_t k);

/// Psi(k) = (k + Phi(k)) / 2: one-step upper envelope used above the early threshold.
double midpoint_envelope(const ProbabilityVector& p, double k);

/// N(k) = Psi(k) - Phi(k) = (k - n + F(k)) / 2, evaluated without cancellation.
double envelope_margin(const ProbabilityVector& p, double k);

/// H_p(k) = N(k)^2 / k. Increasing in k for every p.
double margin_rate(const ProbabilityVector& p, double k);

/// k* = c2^{-1} (ln n)^{-eps}: boundary between the early and middle phases.
double early_threshold(double c2, std::size_t n, double eps);

/// k1 = c2^{-1/2} (ln n)^{-eps/4}: boundary between the middle and late phases.
double late_threshold(double c2, std::size_t n, double eps);

/// Orbit of a deterministic map until it drops to a threshold.
struct DeterministicTrajectory {
  enum class StopReason { reached_threshold, max_iterations };

  std::vector<double> values;  ///< values[t] is the state after t steps
  StopReason stop_reason = StopReason::max_iterations;

  bool reached() const noexcept { return stop_reason == StopReason::reached_threshold; }
  /// Steps taken to reach the threshold (the last index of `values`).
  std::size_t hitting_time() const noexcept { return values.empty() ? 0 : values.size() - 1; }
};

/// Iterates x <- Psi(x) from b0 until x <= stop_at or max_steps is exhausted.
DeterministicTrajectory iterate_envelope(const ProbabilityVector& p, double b0, double stop_at,
                                         std::size_t max_steps);

/// n (1 - sqrt(c2)/4)^t + 2 c2^{-1/2}: closed-form bound on the envelope orbit
/// when c2 >= 2/n.
double topheavy_linear_envelope(double c2, std::size_t n, std::size_t t);

/// Positive root x(t) of 1 - exp(-x) = x (1 - 2/(t+2)), t >= 1, by bisection.
double harmonic_decay_root(std::size_t t);

/// max over 1 <= t <= t_max of (t+1) x(t); the constant in B(t) <= A n / (t+1).
double harmonic_decay_constant(std::size_t t_max = 100000);

/// eta(x) = 1.5 (1 - exp(-x)) - 0.5 x: lower one-step map for topheavy slowdown.
double slowdown_map(double x);

/// gamma = 1 - 2 sqrt(c), c in (0, 1/4): thinning factor for the light boxes.
double light_box_fraction(double c);

}  // namespace coalesce
