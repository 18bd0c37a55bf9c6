#include "coalesce/statistics.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

#include "coalesce/errors.hpp"

namespace coalesce {

void SummaryStats::add(double x) noexcept {
  ++count_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_ += delta * (x - mean_);
}

void SummaryStats::merge(const SummaryStats& other) noexcept {
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(count_);
  const double nb = static_cast<double>(other.count_);
  const double delta = other.mean_ - mean_;
  const double total = na + nb;
  mean_ += delta * nb / total;
  m2_ += other.m2_ + delta * delta * na * nb / total;
  count_ += other.count_;
}

std::optional<double> SummaryStats::variance() const noexcept {
  if (count_ < 2) return std::nullopt;
  return m2_ / static_cast<double>(count_ - 1);
}

std::optional<double> SummaryStats::stderr_of_mean() const noexcept {
  const auto v = variance();
  if (!v) return std::nullopt;
  return std::sqrt(*v / static_cast<double>(count_));
}

std::optional<double> SummaryStats::ci95_low() const noexcept {
  const auto se = stderr_of_mean();
  if (!se) return std::nullopt;
  return mean_ - 1.959963984540054 * *se;
}

std::optional<double> SummaryStats::ci95_high() const noexcept {
  const auto se = stderr_of_mean();
  if (!se) return std::nullopt;
  return mean_ + 1.959963984540054 * *se;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ValidationError("ks_distance needs two nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    // Step past every copy of the smallest remaining value in both samples.
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

ChiSquareResult chi_square_test(std::span<const double> observed, std::span<const double> probs,
                                double min_expected) {
  if (observed.size() != probs.size() || observed.empty()) {
    throw ValidationError("chi_square_test: size mismatch");
  }
  double total = 0.0;
  for (double o : observed) total += o;

  // Pool adjacent cells until each pooled cell has enough expected mass.
  std::vector<std::pair<double, double>> cells;  // (observed, expected)
  double obs_acc = 0.0;
  double exp_acc = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    obs_acc += observed[i];
    exp_acc += probs[i] * total;
    if (exp_acc >= min_expected) {
      cells.emplace_back(obs_acc, exp_acc);
      obs_acc = 0.0;
      exp_acc = 0.0;
    }
  }
  if (exp_acc > 0.0 || obs_acc > 0.0) {
    if (cells.empty()) {
      cells.emplace_back(obs_acc, exp_acc);
    } else {
      cells.back().first += obs_acc;
      cells.back().second += exp_acc;
    }
  }

  ChiSquareResult r{0.0, cells.size() > 1 ? cells.size() - 1 : 0, 1.0};
  for (auto [o, e] : cells) {
    if (e > 0.0) r.statistic += (o - e) * (o - e) / e;
  }
  if (r.degrees_of_freedom > 0) {
    r.p_value = boost::math::gamma_q(0.5 * static_cast<double>(r.degrees_of_freedom),
                                     0.5 * r.statistic);
  }
  return r;
}

}  // namespace coalesce
