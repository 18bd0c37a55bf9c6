#include "coalesce/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include "coalesce/errors.hpp"

namespace coalesce {

namespace {

constexpr double kInputSumTolerance = 1e-9;

double sum_of(std::span<const double> w) {
  // Pairwise-free but compensated; n is at most a few thousand here.
  double sum = 0.0;
  double carry = 0.0;
  for (double x : w) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return sum;
}

}  // namespace

ProbabilityVector ProbabilityVector::new_checked(std::vector<double> weights, bool normalize) {
  if (weights.size() < 2) {
    throw ValidationError("probability vector needs at least 2 entries");
  }
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (!std::isfinite(weights[j]) || weights[j] < 0.0) {
      std::ostringstream msg;
      msg << "weight " << j << " is negative or not finite (" << weights[j] << ")";
      throw ValidationError(msg.str());
    }
  }
  const double total = sum_of(weights);
  if (!(total > 0.0)) throw ValidationError("weights sum to zero");
  if (!normalize && std::abs(total - 1.0) > kInputSumTolerance) {
    std::ostringstream msg;
    msg << "weights sum to " << total << ", not 1 (pass normalize to rescale)";
    throw ValidationError(msg.str());
  }
  for (double& w : weights) w /= total;
  return ProbabilityVector(std::move(weights));
}

ProbabilityVector ProbabilityVector::uniform(std::size_t n) {
  if (n < 2) throw ValidationError("uniform vector needs n >= 2");
  return ProbabilityVector(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

std::vector<double> ProbabilityVector::sorted_descending() const {
  std::vector<double> sorted = weights_;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  return sorted;
}

std::vector<WeightRun> ProbabilityVector::runs() const {
  std::vector<WeightRun> out;
  for (double w : sorted_descending()) {
    if (!out.empty() && out.back().value == w) {
      ++out.back().multiplicity;
    } else {
      out.push_back({w, 1});
    }
  }
  return out;
}

std::size_t ProbabilityVector::support_size() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(weights_.begin(), weights_.end(), [](double w) { return w > 0.0; }));
}

Moments moments(const ProbabilityVector& p) noexcept {
  double c2 = 0.0;
  double c3 = 0.0;
  for (double w : p.weights()) {
    const double sq = w * w;
    c2 += sq;
    c3 += sq * w;
  }
  return {c2, c3};
}

ProbabilityVector topheavy(std::size_t n, double c2) {
  if (n < 2) throw ValidationError("topheavy needs n >= 2");
  const double dn = static_cast<double>(n);
  const double lo = 1.0 / dn;
  if (!(c2 >= lo - 1e-12 && c2 <= 1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "topheavy: c2 = " << c2 << " outside [1/n, 1] for n = " << n;
    throw ValidationError(msg.str());
  }
  const double radicand = std::max(0.0, (dn - 1.0) * (c2 * dn - 1.0));
  const double big = std::min(1.0, (1.0 + std::sqrt(radicand)) / dn);
  const double small = std::max(0.0, (1.0 - big) / (dn - 1.0));
  std::vector<double> w(n, small);
  w[0] = big;
  return ProbabilityVector::new_checked(std::move(w), true);
}

namespace {

// One point of the three-level family parametrised by the middle value.
struct LevelPoint {
  double top;
  double middle;
  double bottom;
  double cube_gap;  // nu*top^3 + middle^3 + mu*bottom^3 - c3
  bool feasible;
};

LevelPoint level_point(double middle, double c2, double c3, double nu, double mu) {
  LevelPoint pt{0, middle, 0, 0, false};
  const double rest = 1.0 - middle;
  const double rest_sq = c2 - middle * middle;
  const double spread = (nu + mu) * rest_sq - rest * rest;
  if (rest < 0.0 || spread < 0.0) return pt;
  pt.top = (rest + std::sqrt(mu * spread / nu)) / (nu + mu);
  pt.bottom = (rest - std::sqrt(nu * spread / mu)) / (nu + mu);
  pt.cube_gap = nu * pt.top * pt.top * pt.top + middle * middle * middle +
                mu * pt.bottom * pt.bottom * pt.bottom - c3;
  pt.feasible = pt.bottom >= 0.0 && pt.bottom <= middle && middle <= pt.top;
  return pt;
}

}  // namespace

std::vector<ProbabilityVector> three_level_all(std::size_t n, double c2, double c3,
                                               std::size_t nu) {
  if (n < 3) throw ValidationError("three_level needs n >= 3");
  if (nu < 1 || nu + 2 > n) throw ValidationError("three_level needs 1 <= nu <= n-2");
  const double dn = static_cast<double>(n);
  if (!(c2 >= 1.0 / dn - 1e-12 && c2 <= 1.0)) throw ValidationError("three_level: c2 out of range");
  if (!(c3 >= c2 * c2 - 1e-12 && c3 <= std::pow(c2, 1.5) + 1e-12)) {
    throw ValidationError("three_level: c3 outside [c2^2, c2^(3/2)]");
  }

  const double nu_d = static_cast<double>(nu);
  const double mu_d = dn - nu_d - 1.0;
  auto at = [&](double t) { return level_point(t, c2, c3, nu_d, mu_d); };

  // Scan the middle value, then bracket sign changes of the cube gap and the
  // edges of the feasible region (where r2 meets r1 or r3).
  constexpr std::size_t kGrid = 4000;
  const double hi = std::min(1.0, std::sqrt(c2));
  const double tol = 1e-13;
  std::vector<double> roots;
  double best_residual = std::numeric_limits<double>::infinity();

  auto bisect = [&](double a, double b, const std::function<double(double)>& f) {
    double fa = f(a);
    for (int it = 0; it < 200 && b - a > 0.0; ++it) {
      const double m = 0.5 * (a + b);
      if (m <= a || m >= b) break;
      const double fm = f(m);
      if ((fm <= 0.0) == (fa <= 0.0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    return std::pair{a, b};
  };
  auto closer = [&](double a, double b) {
    return std::abs(at(a).cube_gap) <= std::abs(at(b).cube_gap) ? a : b;
  };

  LevelPoint prev = at(0.0);
  double prev_t = 0.0;
  for (std::size_t i = 1; i <= kGrid; ++i) {
    const double t = hi * static_cast<double>(i) / kGrid;
    const LevelPoint cur = at(t);
    if (prev.feasible) best_residual = std::min(best_residual, std::abs(prev.cube_gap));
    if (prev.feasible && cur.feasible) {
      if (prev.cube_gap == 0.0) {
        roots.push_back(prev_t);
      } else if (cur.cube_gap != 0.0 && (prev.cube_gap < 0.0) != (cur.cube_gap < 0.0)) {
        auto [a, b] = bisect(prev_t, t, [&](double x) { return at(x).cube_gap; });
        roots.push_back(closer(a, b));
      }
    } else if (prev.feasible != cur.feasible) {
      // Refine the feasibility edge and test the gap there.
      const bool left_in = prev.feasible;
      auto [a, b] = bisect(prev_t, t, [&](double x) { return at(x).feasible ? -1.0 : 1.0; });
      const double edge = left_in ? a : b;
      const LevelPoint e = at(edge);
      if (e.feasible) {
        best_residual = std::min(best_residual, std::abs(e.cube_gap));
        const LevelPoint& inner = left_in ? prev : cur;
        const double inner_t = left_in ? prev_t : t;
        if (std::abs(e.cube_gap) <= tol) {
          roots.push_back(edge);
        } else if (inner.feasible && inner.cube_gap != 0.0 &&
                   (inner.cube_gap < 0.0) != (e.cube_gap < 0.0)) {
          // A sign change between the interior grid point and the edge.
          auto [u, v] = bisect(std::min(inner_t, edge), std::max(inner_t, edge),
                               [&](double x) { return at(x).cube_gap; });
          roots.push_back(closer(u, v));
        }
      }
    }
    prev = cur;
    prev_t = t;
  }

  std::vector<ProbabilityVector> out;
  double worst = 0.0;
  for (double r : roots) {
    const LevelPoint sol = at(r);
    if (!sol.feasible || std::abs(sol.cube_gap) > 1e-9) {
      worst = std::max(worst, std::abs(sol.cube_gap));
      continue;
    }
    std::vector<double> w;
    w.reserve(n);
    w.insert(w.end(), nu, sol.top);
    w.push_back(sol.middle);
    w.insert(w.end(), n - nu - 1, sol.bottom);
    out.push_back(ProbabilityVector::new_checked(std::move(w), true));
  }
  if (out.empty()) {
    if (!roots.empty()) throw NumericalError("three_level: root polish failed", worst);
    std::ostringstream msg;
    msg << "three_level: no vector with nu = " << nu << " matches (c2, c3) = (" << c2 << ", "
        << c3 << "); smallest cube residual " << best_residual;
    throw ValidationError(msg.str());
  }
  return out;
}

ProbabilityVector three_level(std::size_t n, double c2, double c3, std::size_t nu) {
  return three_level_all(n, c2, c3, nu).front();
}

ProbabilityVector random_simplex(std::size_t n, RandomStream& rng) {
  std::vector<double> w(n);
  for (double& x : w) x = rng.exponential();
  return ProbabilityVector::new_checked(std::move(w), true);
}

ProbabilityVector sample_with_collision(std::size_t n, double c2, RandomStream& rng) {
  const double dn = static_cast<double>(n);
  if (n < 2) throw ValidationError("sample_with_collision needs n >= 2");
  if (!(c2 >= 1.0 / dn - 1e-12 && c2 <= 1.0)) {
    throw ValidationError("sample_with_collision: c2 outside [1/n, 1]");
  }
  if (c2 <= 1.0 / dn + 1e-15) return ProbabilityVector::uniform(n);

  const ProbabilityVector start = random_simplex(n, rng);
  std::vector<double> q(start.weights().begin(), start.weights().end());
  const double c2_start = moments(start).c2;

  std::vector<double> target(n, 1.0 / dn);
  if (c2_start < c2) {
    const auto top = std::max_element(q.begin(), q.end()) - q.begin();
    std::fill(target.begin(), target.end(), 0.0);
    target[static_cast<std::size_t>(top)] = 1.0;
  }

  // c2 along q + s*d is the quadratic a s^2 + b s + c2_start; it is monotone
  // on [0, 1] in both cases, so the root in [0, 1] is unique.
  double a = 0.0;
  double b = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double d = target[j] - q[j];
    a += d * d;
    b += 2.0 * q[j] * d;
  }
  const double c = c2_start - c2;
  const double disc = std::max(0.0, b * b - 4.0 * a * c);
  const double qq = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  double s = 0.0;
  std::optional<double> best;
  for (double cand : {qq / a, qq != 0.0 ? c / qq : -1.0}) {
    if (cand >= -1e-12 && cand <= 1.0 + 1e-12 && (!best || cand < *best)) best = cand;
  }
  s = std::clamp(best.value_or(0.0), 0.0, 1.0);
  // Newton polish on the scalar quadratic.
  for (int it = 0; it < 3; ++it) {
    const double f = (a * s + b) * s + c;
    const double df = 2.0 * a * s + b;
    if (df == 0.0) break;
    s = std::clamp(s - f / df, 0.0, 1.0);
  }

  for (std::size_t j = 0; j < n; ++j) q[j] = std::max(0.0, q[j] + s * (target[j] - q[j]));
  return ProbabilityVector::new_checked(std::move(q), true);
}

}  // namespace coalesce
