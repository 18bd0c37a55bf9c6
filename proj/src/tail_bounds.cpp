#include "coalesce/tail_bounds.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "coalesce/csv.hpp"
#include "coalesce/dynamics.hpp"
#include "coalesce/errors.hpp"

namespace coalesce {

namespace {

// Per-box pieces with x = n p r, w = e^{-x}, g = 1 - w, den = w + z g, so that
// 1 + z(e^x - 1) = e^x den. Every ratio below stays bounded for large x.
struct BoxTerm {
  double log_factor;    // ln(1 + z(e^x - 1))
  double occupied;      // (e^x - 1) / (1 + z(e^x - 1)) = g / den
  double tilt;          // e^x / (1 + z(e^x - 1)) = 1 / den
  double tilt_sq;       // e^x / (1 + z(e^x - 1))^2 = w / den^2
  double occupied_sq;   // occupied^2
};

BoxTerm box_term(double x, double z) {
  const double w = std::exp(-x);
  const double g = -std::expm1(-x);
  const double den = w + z * g;
  BoxTerm t{};
  t.log_factor = x < 1.0 ? std::log1p(z * std::expm1(x)) : x + std::log(den);
  t.occupied = g / den;
  t.tilt = 1.0 / den;
  t.tilt_sq = w / (den * den);
  t.occupied_sq = t.occupied * t.occupied;
  return t;
}

void check_point(double k, double z, double r) {
  if (!(k > 0.0)) throw ValidationError("k must be positive");
  if (!(z > 0.0) || !(r > 0.0)) throw ValidationError("z and r must be positive");
}

}  // namespace

double tilt_exponent(const ProbabilityVector& p, double k, double z, double r, double b) {
  check_point(k, z, r);
  const double n = static_cast<double>(p.size());
  double sum = 0.0;
  for (double pj : p.weights()) sum += box_term(n * pj * r, z).log_factor;
  return k * (std::log(k / (r * n)) - 1.0) - b * std::log(z) + sum;
}

TiltDerivatives tilt_derivatives(const ProbabilityVector& p, double k, double z, double r,
                                 double b) {
  check_point(k, z, r);
  const double n = static_cast<double>(p.size());
  double occupied = 0.0, occupied_sq = 0.0, tilt = 0.0, tilt_sq = 0.0, tilt_sq2 = 0.0;
  for (double pj : p.weights()) {
    const BoxTerm t = box_term(n * pj * r, z);
    occupied += t.occupied;
    occupied_sq += t.occupied_sq;
    tilt += pj * t.tilt;
    tilt_sq += pj * t.tilt_sq;
    tilt_sq2 += pj * pj * t.tilt_sq;
  }
  TiltDerivatives d{};
  d.hz = -b / z + occupied;
  d.hr = -k / r + z * n * tilt;
  d.hzz = b / (z * z) - occupied_sq;
  d.hrr = k / (r * r) + z * (1.0 - z) * n * n * tilt_sq2;
  d.hzr = n * tilt_sq;
  return d;
}

double log_chernoff_minus(const ProbabilityVector& p, double k, double b) {
  if (!(k > 0.0)) throw ValidationError("k must be positive");
  const double phi = occupancy_predictor(p, k);
  if (b > phi + 1e-12 * std::max(1.0, phi)) {
    std::ostringstream msg;
    msg << "lower-tail bound needs b <= Phi(k) = " << phi << ", got b = " << b;
    throw ValidationError(msg.str());
  }
  const double gap = phi - b;
  return std::log(3.0) + 0.5 * std::log(k) - gap * gap / (2.0 * k);
}

double log_chernoff_plus(const ProbabilityVector& p, double k, double b) {
  if (!(k > 0.0)) throw ValidationError("k must be positive");
  const double phi = occupancy_predictor(p, k);
  if (b < phi - 1e-12 * std::max(1.0, phi)) {
    std::ostringstream msg;
    msg << "upper-tail bound needs b >= Phi(k) = " << phi << ", got b = " << b;
    throw ValidationError(msg.str());
  }
  const double gap = b - phi;
  return std::log(3.0) + 0.5 * std::log(k) - gap * gap / (2.0 * k);
}

double chernoff_minus(const ProbabilityVector& p, double k, double b) {
  return std::exp(log_chernoff_minus(p, k, b));
}

double chernoff_plus(const ProbabilityVector& p, double k, double b) {
  return std::exp(log_chernoff_plus(p, k, b));
}

StationaryPoint refine_stationary(const ProbabilityVector& p, double k, double b, double z0,
                                  double r0, double tolerance) {
  double z = z0;
  double r = r0;
  TiltDerivatives d = tilt_derivatives(p, k, z, r, b);
  auto norm = [](const TiltDerivatives& t) { return std::max(std::abs(t.hz), std::abs(t.hr)); };
  double res = norm(d);
  for (int it = 0; it < 100 && res > tolerance; ++it) {
    const double det = d.chi();
    if (det == 0.0 || !std::isfinite(det)) break;
    const double dz = -(d.hrr * d.hz - d.hzr * d.hr) / det;
    const double dr = -(d.hzz * d.hr - d.hzr * d.hz) / det;
    double step = 1.0;
    bool moved = false;
    for (int halving = 0; halving < 40; ++halving, step *= 0.5) {
      const double nz = z + step * dz;
      const double nr = r + step * dr;
      if (!(nz > 0.0) || !(nr > 0.0)) continue;
      const TiltDerivatives nd = tilt_derivatives(p, k, nz, nr, b);
      const double nres = norm(nd);
      if (std::isfinite(nres) && nres < res) {
        z = nz;
        r = nr;
        d = nd;
        res = nres;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  if (!(res <= tolerance)) {
    std::ostringstream msg;
    msg << "stationary point at b = " << b << " did not converge (z = " << z << ", r = " << r
        << ")";
    throw NumericalError(msg.str(), res);
  }
  return {b, z, r, d.hz, d.hr};
}

std::vector<std::optional<StationaryPoint>> stationary_curve(const ProbabilityVector& p,
                                                             double k,
                                                             const std::vector<double>& b_grid) {
  if (!(k > 0.0)) throw ValidationError("k must be positive");
  const double n = static_cast<double>(p.size());
  const double b_star = occupancy_predictor(p, k);
  const StationaryPoint origin = refine_stationary(p, k, b_star, 1.0, k / n);
  const double max_step = k / 50.0;

  std::vector<std::optional<StationaryPoint>> out(b_grid.size());
  std::vector<std::size_t> up, down;
  for (std::size_t i = 0; i < b_grid.size(); ++i) {
    (b_grid[i] >= b_star ? up : down).push_back(i);
  }
  std::sort(up.begin(), up.end(), [&](auto a, auto c) { return b_grid[a] < b_grid[c]; });
  std::sort(down.begin(), down.end(), [&](auto a, auto c) { return b_grid[a] > b_grid[c]; });

  for (const auto* side : {&up, &down}) {
    StationaryPoint cur = origin;
    bool alive = true;
    for (std::size_t idx : *side) {
      const double target = b_grid[idx];
      while (alive && cur.b != target) {
        const double gap = target - cur.b;
        const double next_b = std::abs(gap) <= max_step ? target : cur.b + std::copysign(max_step, gap);
        // Tangent predictor from differentiating H_z = H_r = 0 in b.
        const TiltDerivatives d = tilt_derivatives(p, k, cur.z, cur.r, cur.b);
        double z_guess = cur.z;
        double r_guess = cur.r;
        const double chi = d.chi();
        if (chi > 0.0 && d.hzr != 0.0) {
          const double dz = d.hrr / (cur.z * chi);
          const double dr = (1.0 / cur.z - d.hzz * dz) / d.hzr;
          const double h = next_b - cur.b;
          if (cur.z + h * dz > 0.0 && cur.r + h * dr > 0.0) {
            z_guess = cur.z + h * dz;
            r_guess = cur.r + h * dr;
          }
        }
        try {
          cur = refine_stationary(p, k, next_b, z_guess, r_guess);
        } catch (const NumericalError&) {
          alive = false;
        }
      }
      if (alive) out[idx] = cur;
    }
  }
  return out;
}

StationaryPoint solve_stationary(const ProbabilityVector& p, double k, double b) {
  const auto curve = stationary_curve(p, k, {b});
  if (!curve.front()) {
    std::ostringstream msg;
    msg << "no stationary point reached by continuation at b = " << b;
    throw NumericalError(msg.str(), std::numeric_limits<double>::infinity());
  }
  return *curve.front();
}

bool CurvatureReport::all_ok() const noexcept {
  if (solved == 0 || !z_increasing) return false;
  return std::all_of(rows.begin(), rows.end(), [](const CurvatureRow& r) {
    return !r.point || (r.slope_ok && r.curvature_ok && r.chi_ok);
  });
}

CurvatureReport curvature_check(const ProbabilityVector& p, double k, std::vector<double> b_grid,
                                double slope_step, double curvature_step) {
  if (!(k > 0.0)) throw ValidationError("k must be positive");
  CurvatureReport report;
  report.k = k;
  report.b_star = occupancy_predictor(p, k);
  std::erase_if(b_grid, [&](double b) { return !(b > 0.0) || b > k; });
  std::sort(b_grid.begin(), b_grid.end());

  // Every grid point needs h at b, b +- slope_step, b +- 2 slope_step and b +- curvature_step.
  const std::array<double, 7> offsets{0.0,        -2 * slope_step, -slope_step, slope_step,
                                      2 * slope_step, -curvature_step, curvature_step};
  std::vector<double> all;
  all.reserve(b_grid.size() * offsets.size());
  for (double b : b_grid) {
    for (double o : offsets) all.push_back(b + o);
  }
  const auto curve = stationary_curve(p, k, all);

  auto h_at = [&](std::size_t i) -> std::optional<double> {
    if (!curve[i]) return std::nullopt;
    return tilt_exponent(p, k, curve[i]->z, curve[i]->r, curve[i]->b);
  };

  for (std::size_t g = 0; g < b_grid.size(); ++g) {
    CurvatureRow row;
    row.b = b_grid[g];
    std::array<std::optional<double>, 7> h{};
    bool complete = true;
    for (std::size_t o = 0; o < offsets.size(); ++o) {
      h[o] = h_at(g * offsets.size() + o);
      complete = complete && h[o].has_value();
    }
    if (!complete) {
      ++report.skipped;
      report.rows.push_back(row);
      continue;
    }
    ++report.solved;
    row.point = curve[g * offsets.size()];
    row.h = *h[0];
    row.slope_exact = -std::log(row.point->z);
    row.slope_estimate = (*h[1] - 8.0 * *h[2] + 8.0 * *h[3] - *h[4]) / (12.0 * slope_step);
    row.second_difference = (*h[6] - 2.0 * *h[0] + *h[5]) / (curvature_step * curvature_step);
    row.chi = tilt_derivatives(p, k, row.point->z, row.point->r, row.b).chi();
    row.slope_ok = std::abs(row.slope_estimate - row.slope_exact) <=
                   1e-4 * std::max(std::abs(row.slope_exact), 1e-6);
    row.curvature_ok = row.second_difference <= -1.0 / k + 1e-6;
    row.chi_ok = row.chi > 0.0;
    report.rows.push_back(row);
  }

  const CurvatureRow* last = nullptr;
  for (const auto& row : report.rows) {
    if (!row.point) continue;
    if (last && !(row.point->z > last->point->z)) report.z_increasing = false;
    last = &row;
  }
  return report;
}

void write_curvature_csv(std::ostream& out, const CurvatureReport& report) {
  CsvWriter csv(out, {"b", "z", "r", "h", "h2", "chi", "slope", "slope_fd", "solved"});
  for (const auto& row : report.rows) {
    if (row.point) {
      csv.cell(row.b).cell(row.point->z).cell(row.point->r).cell(row.h);
      csv.cell(row.second_difference).cell(row.chi).cell(row.slope_exact);
      csv.cell(row.slope_estimate).cell(1);
    } else {
      csv.cell(row.b);
      for (int i = 0; i < 7; ++i) csv.cell(std::string_view("nan"));
      csv.cell(0);
    }
    csv.end_row();
  }
}

double lower_bound_expected_time(double c2, double c3, std::size_t m) {
  if (m < 1) throw ValidationError("m must be at least 1");
  if (!(c2 > 0.0)) throw ValidationError("c2 must be positive");
  const double md = static_cast<double>(m);
  return 2.0 / c2 * (1.0 - 1.0 / md - (md - 1.0) * (md - 2.0) * c3 / (12.0 * c2));
}

MarginReport margin_at_early_threshold(const ProbabilityVector& p, double eps) {
  const std::size_t n = p.size();
  const double c2 = moments(p).c2;
  MarginReport r{};
  r.k_star = early_threshold(c2, n, eps);
  r.rate = margin_rate(p, r.k_star);
  r.log_power = std::pow(std::log(static_cast<double>(n)), 1.0 + eps);
  r.ratio = r.rate / r.log_power;
  return r;
}

}  // namespace coalesce
