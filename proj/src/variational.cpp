#include "coalesce/variational.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "coalesce/dynamics.hpp"
#include "coalesce/errors.hpp"
#include "coalesce/parallel.hpp"

namespace coalesce {

namespace {

struct Candidate {
  std::vector<double> q;
  double value = std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
};

double proxy(const std::vector<double>& q, double k) {
  double f = 0.0;
  for (double x : q) f += std::exp(-k * x);
  return f;
}

// Distinct indices drawn uniformly.
template <std::size_t M>
std::array<std::size_t, M> pick(std::size_t n, RandomStream& rng) {
  std::array<std::size_t, M> idx{};
  for (std::size_t a = 0; a < M; ++a) {
    bool fresh = false;
    while (!fresh) {
      idx[a] = rng.below(n);
      fresh = std::find(idx.begin(), idx.begin() + a, idx[a]) == idx.begin() + a;
    }
  }
  return idx;
}

// Shifts q[i] by t and re-solves q[j], q[l] so the sum and the sum of squares
// of the triple are unchanged. Returns false when no real nonnegative pair exists.
bool triple_move(std::vector<double>& q, std::array<std::size_t, 3> idx, double t,
                 std::array<double, 3>& out) {
  const double a = q[idx[0]], b = q[idx[1]], c = q[idx[2]];
  const double na = a + t;
  if (na < 0.0) return false;
  const double s = (a + b + c) - na;
  const double sq = (a * a + b * b + c * c) - na * na;
  double disc = 2.0 * sq - s * s;
  if (disc < 0.0) {
    if (disc < -1e-15) return false;
    disc = 0.0;
  }
  const double root = std::sqrt(disc);
  const double hi = 0.5 * (s + root);
  const double lo = 0.5 * (s - root);
  if (lo < 0.0) return false;
  out = {na, b >= c ? hi : lo, b >= c ? lo : hi};
  return true;
}

// Real roots of x^3 - e1 x^2 + e2 x - e3, ascending, when all three are real.
bool cubic_roots(double e1, double e2, double e3, std::array<double, 3>& roots) {
  const double a = -e1;
  const double p = e2 - a * a / 3.0;
  const double qc = 2.0 * a * a * a / 27.0 - a * e2 / 3.0 - e3;
  if (p >= 0.0) {
    // Only a triple root can be fully real here.
    if (p > 1e-14) return false;
    roots.fill(-a / 3.0);
  } else {
    const double m = 2.0 * std::sqrt(-p / 3.0);
    double arg = 3.0 * qc / (p * m);
    if (arg > 1.0 + 1e-9 || arg < -1.0 - 1e-9) return false;
    arg = std::clamp(arg, -1.0, 1.0);
    const double phi = std::acos(arg) / 3.0;
    for (int r = 0; r < 3; ++r) {
      roots[r] = m * std::cos(phi - 2.0 * std::numbers::pi * r / 3.0) - a / 3.0;
    }
  }
  for (double& x : roots) {
    for (int it = 0; it < 2; ++it) {
      const double f = ((x - e1) * x + e2) * x - e3;
      const double df = (3.0 * x - 2.0 * e1) * x + e2;
      if (df == 0.0) break;
      x -= f / df;
    }
  }
  std::sort(roots.begin(), roots.end());
  return true;
}

// Shifts q[idx[0]] by t and re-solves the other three from their first three
// power sums; they keep their relative order.
bool quad_move(const std::vector<double>& q, std::array<std::size_t, 4> idx, double t,
               std::array<double, 4>& out) {
  double s1 = 0.0, s2 = 0.0, s3 = 0.0;
  for (auto i : idx) {
    s1 += q[i];
    s2 += q[i] * q[i];
    s3 += q[i] * q[i] * q[i];
  }
  const double y = q[idx[0]] + t;
  if (y < 0.0) return false;
  const double p1 = s1 - y;
  const double p2 = s2 - y * y;
  const double p3 = s3 - y * y * y;
  const double e2 = 0.5 * (p1 * p1 - p2);
  const double e3 = (p1 * p1 * p1 - 3.0 * p1 * p2 + 2.0 * p3) / 6.0;
  std::array<double, 3> roots{};
  if (!cubic_roots(p1, e2, e3, roots)) return false;
  if (roots[0] < 0.0) return false;

  std::array<std::size_t, 3> order{1, 2, 3};
  std::sort(order.begin(), order.end(),
            [&](std::size_t u, std::size_t v) { return q[idx[u]] < q[idx[v]]; });
  out[0] = y;
  for (std::size_t r = 0; r < 3; ++r) out[order[r]] = roots[r];

  double n2 = 0.0, n3 = 0.0;
  for (double v : out) {
    n2 += v * v;
    n3 += v * v * v;
  }
  return std::abs(n2 - s2) <= 1e-13 && std::abs(n3 - s3) <= 1e-13;
}

// Adaptive step scale: grow on success, shrink on failure, reset when tiny.
struct StepScale {
  double initial;
  double value;
  void success() { value = std::min(initial * 4.0, value * 1.5); }
  void failure() {
    value *= 0.97;
    if (value < initial * 1e-9) value = initial;
  }
};

Candidate descend_collision(std::vector<double> q, double k, std::size_t moves,
                            RandomStream& rng) {
  const std::size_t n = q.size();
  Candidate c;
  c.value = proxy(q, k);
  c.evaluations = 1;
  StepScale step{0.25 * std::sqrt(moments(ProbabilityVector::new_checked(q, true)).c2), 0.0};
  step.value = step.initial;
  for (std::size_t m = 0; m < moves; ++m) {
    const auto idx = pick<3>(n, rng);
    std::array<double, 3> next{};
    ++c.evaluations;
    if (!triple_move(q, idx, step.value * rng.normal(), next)) {
      step.failure();
      continue;
    }
    double delta = 0.0;
    for (std::size_t a = 0; a < 3; ++a) delta += std::exp(-k * next[a]) - std::exp(-k * q[idx[a]]);
    if (delta < 0.0) {
      for (std::size_t a = 0; a < 3; ++a) q[idx[a]] = next[a];
      c.value += delta;
      step.success();
    } else {
      step.failure();
    }
  }
  c.value = proxy(q, k);
  c.q = std::move(q);
  return c;
}

Candidate descend_moments(std::vector<double> q, double k, std::size_t explore,
                          std::size_t moves, RandomStream& rng) {
  const std::size_t n = q.size();
  Candidate c;
  const double scale = 0.05 * *std::max_element(q.begin(), q.end());
  StepScale step{scale, scale};
  for (std::size_t m = 0; m < explore + moves; ++m) {
    const bool greedy = m >= explore;
    const auto idx = pick<4>(n, rng);
    std::array<double, 4> next{};
    ++c.evaluations;
    if (!quad_move(q, idx, step.value * rng.normal(), next)) {
      step.failure();
      continue;
    }
    double delta = 0.0;
    for (std::size_t a = 0; a < 4; ++a) delta += std::exp(-k * next[a]) - std::exp(-k * q[idx[a]]);
    if (!greedy || delta < 0.0) {
      for (std::size_t a = 0; a < 4; ++a) q[idx[a]] = next[a];
      step.success();
    } else {
      step.failure();
    }
  }
  c.value = proxy(q, k);
  c.q = std::move(q);
  return c;
}

// Runs `restarts` independent searches and keeps the smallest value; ties go
// to the lowest restart index.
template <typename Body>
SearchResult reduce_restarts(std::size_t restarts, std::uint64_t master, std::size_t threads,
                             Body body) {
  std::vector<Candidate> found(restarts);
  parallel_for(restarts, std::min(resolve_threads(threads), restarts),
               [&](std::size_t, std::size_t r) {
                 RandomStream stream(master, r);
                 found[r] = body(r, stream);
               });
  std::size_t best = 0;
  std::size_t evaluations = 0;
  for (std::size_t r = 0; r < restarts; ++r) {
    evaluations += found[r].evaluations;
    if (found[r].value < found[best].value) best = r;
  }
  return {ProbabilityVector::new_checked(std::move(found[best].q), true), found[best].value,
          evaluations};
}

std::size_t restart_count(std::size_t budget) {
  return std::clamp<std::size_t>(budget / 5000, 1, 64);
}

}  // namespace

SearchResult minimize_over_collision_class(std::size_t n, double c2, double k, std::size_t budget,
                                           RandomStream& rng, std::size_t threads) {
  const double dn = static_cast<double>(n);
  if (n < 2) throw ValidationError("search needs n >= 2");
  if (!(c2 >= 1.0 / dn - 1e-12 && c2 <= 1.0)) throw ValidationError("c2 outside [1/n, 1]");
  if (!(k > 0.0)) throw ValidationError("k must be positive");
  if (budget < 1) throw ValidationError("budget must be positive");

  const std::uint64_t master = rng();
  if (n == 2 || c2 <= 1.0 / dn + 1e-15) {
    // The class is a single point up to permutation.
    RandomStream stream(master, 0);
    ProbabilityVector q = sample_with_collision(n, c2, stream);
    const double value = empty_proxy(q, k);
    return {std::move(q), value, 1};
  }
  const std::size_t restarts = restart_count(budget);
  const std::size_t moves = budget / restarts;
  return reduce_restarts(restarts, master, threads, [&](std::size_t, RandomStream& stream) {
    const ProbabilityVector start = sample_with_collision(n, c2, stream);
    return descend_collision(std::vector<double>(start.weights().begin(), start.weights().end()),
                             k, moves > 0 ? moves - 1 : 0, stream);
  });
}

SearchResult minimize_over_moment_class(const ProbabilityVector& start, double k,
                                        std::size_t budget, RandomStream& rng,
                                        std::size_t threads) {
  const std::size_t n = start.size();
  if (n < 4) throw ValidationError("moment-class search needs n >= 4");
  if (!(k > 0.0)) throw ValidationError("k must be positive");
  if (budget < 1) throw ValidationError("budget must be positive");

  const std::uint64_t master = rng();
  const std::size_t restarts = restart_count(budget);
  const std::size_t moves = budget / restarts;
  const std::vector<double> origin(start.weights().begin(), start.weights().end());
  return reduce_restarts(restarts, master, threads, [&](std::size_t r, RandomStream& stream) {
    // Restart 0 descends from the start itself; the others wander first.
    const std::size_t explore = r == 0 ? 0 : std::min(moves / 2, 50 * n);
    return descend_moments(origin, k, explore, moves - explore, stream);
  });
}

OrderingReport ordering_chain(const ProbabilityVector& p, double k, std::size_t nu_min,
                              std::size_t nu_max, double tolerance) {
  if (!(k > 0.0)) throw ValidationError("k must be positive");
  const std::size_t n = p.size();
  const Moments mom = moments(p);
  OrderingReport r{};
  r.k = k;
  r.f_p = empty_proxy(p, k);
  r.f_topheavy = empty_proxy(topheavy(n, std::max(mom.c2, 1.0 / static_cast<double>(n))), k);
  r.f_uniform = static_cast<double>(n) * std::exp(-k / static_cast<double>(n));

  if (n >= 3) {
    const std::size_t lo = std::max<std::size_t>(nu_min, 1);
    const std::size_t hi = std::min(nu_max, n - 2);
    for (std::size_t nu = lo; nu <= hi; ++nu) {
      std::vector<ProbabilityVector> family;
      try {
        family = three_level_all(n, mom.c2, mom.c3, nu);
      } catch (const ValidationError&) {
        continue;
      } catch (const NumericalError&) {
        continue;
      }
      double value = std::numeric_limits<double>::infinity();
      for (const auto& v : family) value = std::min(value, empty_proxy(v, k));
      r.three_level.emplace_back(nu, value);
      if (!r.f_three_level || value < *r.f_three_level) {
        r.f_three_level = value;
        r.best_nu = nu;
      }
    }
  }

  r.ordered = r.f_topheavy >= r.f_uniform - tolerance;
  if (r.f_three_level) {
    r.ordered = r.ordered && r.f_p >= *r.f_three_level - tolerance &&
                *r.f_three_level >= r.f_topheavy - tolerance;
  } else {
    r.ordered = r.ordered && r.f_p >= r.f_topheavy - tolerance;
  }
  return r;
}

long double case1_determinant(double x1, double x2, double x3, double x4) {
  if (!(x1 > x2 && x2 > x3 && x3 > x4 && x4 >= 0.0)) {
    throw ValidationError("case1_determinant needs x1 > x2 > x3 > x4 >= 0");
  }
  // Moving the exponential column last gives -V(x) f[x1,x2,x3,x4] with V the
  // Vandermonde product and f[...] the third divided difference of exp(-x).
  const std::array<long double, 4> x{x1, x2, x3, x4};
  std::array<long double, 4> dd{};
  for (std::size_t i = 0; i < 4; ++i) dd[i] = std::exp(-x[i]);
  for (std::size_t level = 1; level < 4; ++level) {
    for (std::size_t i = 3; i >= level; --i) {
      dd[i] = (dd[i] - dd[i - 1]) / (x[i] - x[i - level]);
    }
  }
  long double vandermonde = 1.0L;
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = a + 1; b < 4; ++b) vandermonde *= x[b] - x[a];
  }
  return -vandermonde * dd[3];
}

long double case2_T(double x1, double x, double x4) {
  if (!(x1 > x && x > x4 && x4 >= 0.0)) {
    throw ValidationError("case2_T needs x1 > x > x4 >= 0");
  }
  const long double a = x1, m = x, c = x4;
  const long double delta = (m - a) * (c - a) * (c - m);
  // e^{x} T = (x-x4)^2 (1 - e^{x-x1}) + (x-x1)^2 (e^{x-x4} - 1) + delta.
  const long double scaled = -(m - c) * (m - c) * std::expm1(m - a) +
                             (m - a) * (m - a) * std::expm1(m - c) + delta;
  return std::exp(-m) * scaled;
}

std::size_t distinct_levels(const ProbabilityVector& q, double gap) {
  const auto sorted = q.sorted_descending();
  std::size_t levels = sorted.empty() ? 0 : 1;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i - 1] - sorted[i] > gap) ++levels;
  }
  return levels;
}

nlohmann::json search_to_json(const SearchResult& r, double reference) {
  const Moments m = moments(r.best);
  return {{"best", r.best.sorted_descending()},
          {"value", r.value},
          {"reference", reference},
          {"gap", r.value - reference},
          {"evaluations", r.evaluations},
          {"c2", m.c2},
          {"c3", m.c3},
          {"distinct_levels", distinct_levels(r.best)}};
}

nlohmann::json ordering_to_json(const OrderingReport& r) {
  nlohmann::json levels = nlohmann::json::array();
  for (auto [nu, f] : r.three_level) levels.push_back({{"nu", nu}, {"F", f}});
  nlohmann::json out{{"k", r.k},
                     {"F_p", r.f_p},
                     {"F_topheavy", r.f_topheavy},
                     {"F_uniform", r.f_uniform},
                     {"three_level", levels},
                     {"ordered", r.ordered}};
  out["F_three_level"] = r.f_three_level ? nlohmann::json(*r.f_three_level) : nlohmann::json();
  out["best_nu"] = r.best_nu ? nlohmann::json(*r.best_nu) : nlohmann::json();
  return out;
}

}  // namespace coalesce
