#include "coalesce/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "coalesce/errors.hpp"

namespace coalesce {

namespace {

// x - 1 + exp(-x) >= 0, accurate for small x.
double excess(double x) {
  if (x < 1e-3) {
    const double x2 = x * x;
    return x2 * (0.5 - x / 6.0 + x2 / 24.0 - x2 * x / 120.0);
  }
  return x + std::expm1(-x);
}

void require_nonnegative(double k) {
  if (!(k >= 0.0)) throw ValidationError("ball count must be nonnegative");
}

}  // namespace

double empty_proxy(const ProbabilityVector& p, double k) {
  require_nonnegative(k);
  double sum = 0.0;
  for (double w : p.weights()) sum += std::exp(-k * w);
  return sum;
}

double occupancy_predictor(const ProbabilityVector& p, double k) {
  require_nonnegative(k);
  double sum = 0.0;
  for (double w : p.weights()) sum -= std::expm1(-k * w);
  return sum;
}

double expected_next(const ProbabilityVector& p, std::size_t k) {
  if (k < 1 || k > p.size()) throw ValidationError("expected_next needs 1 <= k <= n");
  const double dk = static_cast<double>(k);
  double sum = 0.0;
  for (double w : p.weights()) {
    if (w >= 1.0) {
      sum += 1.0;
    } else {
      sum -= std::expm1(dk * std::log1p(-w));
    }
  }
  return sum;
}

double midpoint_envelope(const ProbabilityVector& p, double k) {
  return 0.5 * (k + occupancy_predictor(p, k));
}

double envelope_margin(const ProbabilityVector& p, double k) {
  require_nonnegative(k);
  double sum = 0.0;
  for (double w : p.weights()) sum += excess(k * w);
  return 0.5 * sum;
}

double margin_rate(const ProbabilityVector& p, double k) {
  if (!(k > 0.0)) throw ValidationError("margin_rate needs k > 0");
  const double m = envelope_margin(p, k);
  return m * m / k;
}

namespace {
void check_threshold_args(double c2, std::size_t n, double eps) {
  if (!(eps > 0.0 && eps < 0.25)) throw ValidationError("threshold: eps must lie in (0, 1/4)");
  if (!(c2 > 0.0 && c2 <= 1.0)) throw ValidationError("threshold: c2 must lie in (0, 1]");
  if (n < 3) throw ValidationError("threshold: n must be at least 3");
}
}  // namespace

double early_threshold(double c2, std::size_t n, double eps) {
  check_threshold_args(c2, n, eps);
  return std::pow(std::log(static_cast<double>(n)), -eps) / c2;
}

double late_threshold(double c2, std::size_t n, double eps) {
  check_threshold_args(c2, n, eps);
  return std::pow(std::log(static_cast<double>(n)), -eps / 4.0) / std::sqrt(c2);
}

DeterministicTrajectory iterate_envelope(const ProbabilityVector& p, double b0, double stop_at,
                                         std::size_t max_steps) {
  if (!(stop_at > 0.0 && stop_at <= b0 && b0 <= static_cast<double>(p.size()))) {
    throw ValidationError("iterate_envelope needs 0 < stop_at <= b0 <= n");
  }
  DeterministicTrajectory traj;
  traj.values.push_back(b0);
  double x = b0;
  for (std::size_t t = 0; x > stop_at; ++t) {
    if (t == max_steps) return traj;
    x = midpoint_envelope(p, x);
    traj.values.push_back(x);
  }
  traj.stop_reason = DeterministicTrajectory::StopReason::reached_threshold;
  return traj;
}

double topheavy_linear_envelope(double c2, std::size_t n, std::size_t t) {
  const double dn = static_cast<double>(n);
  if (!(c2 >= 2.0 / dn - 1e-15 && c2 <= 1.0)) {
    throw ValidationError("topheavy_linear_envelope needs 2/n <= c2 <= 1");
  }
  const double rate = 1.0 - std::sqrt(c2) / 4.0;
  return dn * std::pow(rate, static_cast<double>(t)) + 2.0 / std::sqrt(c2);
}

double harmonic_decay_root(std::size_t t) {
  if (t < 1) throw ValidationError("harmonic_decay_root needs t >= 1");
  const double dt = static_cast<double>(t);
  const double slope = dt / (dt + 2.0);
  const double gap = 2.0 / (dt + 2.0);  // 1 - slope, exact
  // g(x) = 1 - e^{-x} - slope x is positive on (0, root) and negative after.
  auto g = [&](double x) { return -std::expm1(-x) - slope * x; };
  double lo = 0.5 * gap;
  double hi = 1.0 / slope;
  while (hi - lo > 1e-12 * std::max(1.0, lo) && hi - lo > 0.0) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (g(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double harmonic_decay_constant(std::size_t t_max) {
  double best = 0.0;
  for (std::size_t t = 1; t <= t_max; ++t) {
    best = std::max(best, static_cast<double>(t + 1) * harmonic_decay_root(t));
  }
  return best;
}

double slowdown_map(double x) { return 1.5 * -std::expm1(-x) - 0.5 * x; }

double light_box_fraction(double c) {
  if (!(c > 0.0 && c < 0.25)) throw ValidationError("light_box_fraction needs c in (0, 1/4)");
  return 1.0 - 2.0 * std::sqrt(c);
}

}  // namespace coalesce
