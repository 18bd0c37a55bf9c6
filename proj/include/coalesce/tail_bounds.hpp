#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "coalesce/distributions.hpp"

namespace coalesce {

/// Tilted exponent H(z, r, b) = k ln(k/(r n e)) - b ln z + sum_j ln(1 + z(e^{n p_j r} - 1)).
double tilt_exponent(const ProbabilityVector& p, double k, double z, double r, double b);

/// Gradient and Hessian of the tilted exponent in (z, r).
struct TiltDerivatives {
  double hz;
  double hr;
  double hzz;
  double hrr;
  double hzr;
  double chi() const noexcept { return hzz * hrr - hzr * hzr; }
};

TiltDerivatives tilt_derivatives(const ProbabilityVector& p, double k, double z, double r,
                                 double b);

/// log of 3 sqrt(k) exp(-(Phi(k) - b)^2 / (2k)).
double log_chernoff_minus(const ProbabilityVector& p, double k, double b);
double log_chernoff_plus(const ProbabilityVector& p, double k, double b);
/// Lower-tail bound on P(B(t+1) < b | B(t) = k); requires b <= Phi(k).
double chernoff_minus(const ProbabilityVector& p, double k, double b);
/// Upper-tail bound on P(B(t+1) > b | B(t) = k); requires b >= Phi(k).
double chernoff_plus(const ProbabilityVector& p, double k, double b);

/// Solution of H_z = H_r = 0 at a given b.
struct StationaryPoint {
  double b;
  double z;
  double r;
  double residual_z;
  double residual_r;
};

/// Newton refinement at b starting from (z, r). Throws NumericalError when
/// the residuals do not reach `tolerance`.
StationaryPoint refine_stationary(const ProbabilityVector& p, double k, double b, double z0,
                                  double r0, double tolerance = 1e-9);

/// Stationary points along `b_grid`, each reached by continuation from
/// b* = Phi(k) in steps of at most k/50. Entries are empty where Newton
/// failed; continuation does not cross a failure.
std::vector<std::optional<StationaryPoint>> stationary_curve(const ProbabilityVector& p,
                                                             double k,
                                                             const std::vector<double>& b_grid);

StationaryPoint solve_stationary(const ProbabilityVector& p, double k, double b);

/// h(b) = H(z(b), r(b), b) together with the checks on its derivatives.
struct CurvatureRow {
  double b;
  std::optional<StationaryPoint> point;
  double h = 0.0;
  double slope_exact = 0.0;      ///< -ln z(b)
  double slope_estimate = 0.0;   ///< five-point difference of h
  double second_difference = 0.0;
  double chi = 0.0;
  bool slope_ok = false;
  bool curvature_ok = false;
  bool chi_ok = false;
};

struct CurvatureReport {
  double k;
  double b_star;
  std::vector<CurvatureRow> rows;
  std::size_t solved = 0;
  std::size_t skipped = 0;
  bool z_increasing = true;
  bool all_ok() const noexcept;
};

/// Checks at each grid point: h'(b) = -ln z(b) to relative 1e-4 (floored
/// at 1e-6 in the denominator), discrete h'' <= -1/k + 1e-6, and chi > 0.
/// Grid points above k are dropped since the curvature bound is only
/// claimed for b <= k.
CurvatureReport curvature_check(const ProbabilityVector& p, double k, std::vector<double> b_grid,
                                double slope_step = 1e-3, double curvature_step = 0.05);

void write_curvature_csv(std::ostream& out, const CurvatureReport& report);

/// 2/c2 (1 - 1/m - (m-1)(m-2) c3 / (12 c2)), a lower bound on E[T(m)].
double lower_bound_expected_time(double c2, double c3, std::size_t m);

/// H_p(k*) against (ln n)^{1+eps} at the early threshold.
struct MarginReport {
  double k_star;
  double rate;
  double log_power;
  double ratio;
};

MarginReport margin_at_early_threshold(const ProbabilityVector& p, double eps);

}  // namespace coalesce
