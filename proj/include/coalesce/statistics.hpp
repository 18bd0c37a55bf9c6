#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace coalesce {

/// Streaming mean/variance (Welford) with an exact pairwise merge.
class SummaryStats {
 public:
  void add(double x) noexcept;
  void merge(const SummaryStats& other) noexcept;

  std::size_t count() const noexcept { return count_; }
  double mean() const noexcept { return mean_; }
  /// Unbiased sample variance; empty with fewer than two observations.
  std::optional<double> variance() const noexcept;
  std::optional<double> stderr_of_mean() const noexcept;
  std::optional<double> ci95_low() const noexcept;
  std::optional<double> ci95_high() const noexcept;

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Two-sample Kolmogorov-Smirnov distance sup_x |F_a(x) - F_b(x)|, tie-aware.
double ks_distance(std::vector<double> a, std::vector<double> b);

/// Upper-tail p-value of Pearson's chi-square statistic for observed counts
/// against probabilities. Cells with expected count below `min_expected` are
/// pooled into their neighbour.
struct ChiSquareResult {
  double statistic;
  std::size_t degrees_of_freedom;
  double p_value;
};

ChiSquareResult chi_square_test(std::span<const double> observed, std::span<const double> probs,
                                double min_expected = 5.0);

}  // namespace coalesce
