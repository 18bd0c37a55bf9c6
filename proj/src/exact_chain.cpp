#include "coalesce/exact_chain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "coalesce/csv.hpp"
#include "coalesce/errors.hpp"

namespace coalesce {

double TransitionRow::total() const noexcept {
  double s = 0.0;
  for (double x : probs) s += x;
  return s;
}

double TransitionRow::mean() const noexcept {
  double s = 0.0;
  for (std::size_t b = 0; b < probs.size(); ++b) s += static_cast<double>(b) * probs[b];
  return s;
}

double TransitionRow::leave_probability() const noexcept {
  double s = 0.0;
  for (std::size_t b = 1; b < k && b < probs.size(); ++b) s += probs[b];
  return s;
}

namespace {

// Lower-triangular table indexed by (balls s, occupied b), b <= s <= k_max.
class OccupancyTable {
 public:
  explicit OccupancyTable(std::size_t k_max)
      : k_max_(k_max), data_((k_max + 1) * (k_max + 2) / 2, 0.0) {}

  std::size_t k_max() const noexcept { return k_max_; }
  double& operator()(std::size_t s, std::size_t b) noexcept { return data_[s * (s + 1) / 2 + b]; }
  double operator()(std::size_t s, std::size_t b) const noexcept {
    return data_[s * (s + 1) / 2 + b];
  }

 private:
  std::size_t k_max_;
  std::vector<double> data_;
};

// Occupancy law of s balls thrown uniformly into m boxes, s = 0..k_max.
OccupancyTable uniform_occupancy(std::size_t m, std::size_t k_max) {
  OccupancyTable occ(k_max);
  occ(0, 0) = 1.0;
  const double dm = static_cast<double>(m);
  for (std::size_t s = 1; s <= k_max; ++s) {
    const std::size_t top = std::min(s, m);
    for (std::size_t b = 1; b <= top; ++b) {
      double v = 0.0;
      if (b <= s - 1) v += occ(s - 1, b) * (static_cast<double>(b) / dm);
      v += occ(s - 1, b - 1) * (static_cast<double>(m - b + 1) / dm);
      occ(s, b) = v;
    }
  }
  return occ;
}

// Row s of Binomial(s, alpha), updated in place from row s - 1.
class BinomialRows {
 public:
  BinomialRows(std::size_t k_max, double alpha, double beta)
      : alpha_(alpha), beta_(beta), w_(k_max + 1, 0.0) {
    w_[0] = 1.0;
  }

  void advance(std::size_t s) {
    w_[s] = alpha_ * w_[s - 1];
    for (std::size_t e = s - 1; e >= 1; --e) w_[e] = beta_ * w_[e] + alpha_ * w_[e - 1];
    w_[0] *= beta_;
  }

  double operator[](std::size_t e) const noexcept { return w_[e]; }

 private:
  double alpha_;
  double beta_;
  std::vector<double> w_;
};

// Fold one box of mass q into a table built on mass `mass`.
OccupancyTable fold_single_box(const OccupancyTable& old, double mass, double q) {
  const std::size_t k_max = old.k_max();
  OccupancyTable next(k_max);
  BinomialRows w(k_max, q / (mass + q), mass / (mass + q));
  for (std::size_t s = 0; s <= k_max; ++s) {
    if (s > 0) w.advance(s);
    for (std::size_t b = 0; b <= s; ++b) {
      double v = w[0] * old(s, b);
      if (b >= 1) {
        // e balls in the new box (e >= 1), the other s - e occupy b - 1 old boxes.
        for (std::size_t e = 1; e + b - 1 <= s; ++e) v += w[e] * old(s - e, b - 1);
      }
      next(s, b) = v;
    }
  }
  return next;
}

// Fold a block of m equal boxes with total mass q.
OccupancyTable fold_block(const OccupancyTable& old, double mass, double q, std::size_t m) {
  const std::size_t k_max = old.k_max();
  const OccupancyTable block = uniform_occupancy(m, k_max);
  OccupancyTable next(k_max);
  BinomialRows w(k_max, q / (mass + q), mass / (mass + q));
  for (std::size_t s = 0; s <= k_max; ++s) {
    if (s > 0) w.advance(s);
    for (std::size_t b = 0; b <= s; ++b) {
      double v = 0.0;
      for (std::size_t e = 0; e <= s; ++e) {
        const std::size_t rest = s - e;
        double inner = 0.0;
        const std::size_t c_hi = std::min({e, m, b});
        for (std::size_t c = 0; c <= c_hi; ++c) {
          if (b - c > rest) continue;
          inner += block(e, c) * old(rest, b - c);
        }
        v += w[e] * inner;
      }
      next(s, b) = v;
    }
  }
  return next;
}

}  // namespace

std::vector<TransitionRow> transition_table(const ProbabilityVector& p, std::size_t k_max,
                                            RowMethod method) {
  if (k_max < 1 || k_max > p.size()) throw ValidationError("transition rows need 1 <= k <= n");

  std::vector<WeightRun> groups;
  if (method == RowMethod::grouped) {
    for (const auto& run : p.runs()) {
      if (run.value > 0.0) groups.push_back(run);
    }
  } else {
    for (double w : p.weights()) {
      if (w > 0.0) groups.push_back({w, 1});
    }
  }

  std::size_t seed = 0;
  if (method == RowMethod::grouped) {
    for (std::size_t g = 1; g < groups.size(); ++g) {
      if (groups[g].multiplicity > groups[seed].multiplicity) seed = g;
    }
  }

  OccupancyTable table = uniform_occupancy(groups[seed].multiplicity, k_max);
  double mass = groups[seed].value * static_cast<double>(groups[seed].multiplicity);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (g == seed) continue;
    const double q = groups[g].value * static_cast<double>(groups[g].multiplicity);
    table = groups[g].multiplicity == 1 ? fold_single_box(table, mass, q)
                                        : fold_block(table, mass, q, groups[g].multiplicity);
    mass += q;
  }

  std::vector<TransitionRow> rows(k_max + 1);
  for (std::size_t k = 1; k <= k_max; ++k) {
    rows[k].k = k;
    rows[k].probs.assign(k + 1, 0.0);
    for (std::size_t b = 1; b <= k; ++b) rows[k].probs[b] = table(k, b);
    const double total = rows[k].total();
    if (!(std::abs(total - 1.0) <= 1e-10)) {
      std::ostringstream msg;
      msg << "transition row k = " << k << " lost mass (sum " << total << ")";
      throw NumericalError(msg.str(), std::abs(total - 1.0));
    }
  }
  return rows;
}

TransitionRow transition_row(const ProbabilityVector& p, std::size_t k, RowMethod method) {
  auto rows = transition_table(p, k, method);
  return std::move(rows[k]);
}

Tails tails(const TransitionRow& row, std::size_t b) {
  if (b < 1 || b > row.k) throw ValidationError("tails needs 1 <= b <= k");
  Tails t{0.0, 0.0};
  for (std::size_t i = 1; i < b; ++i) t.below += row.at(i);
  for (std::size_t i = b + 1; i <= row.k; ++i) t.above += row.at(i);
  return t;
}

double collision_gap_lower_bound(const ProbabilityVector& p, std::size_t k) {
  if (k < 2) throw ValidationError("collision_gap_lower_bound needs k >= 2");
  const auto [c2, c3] = moments(p);
  const double dk = static_cast<double>(k);
  const double pairs = dk * (dk - 1.0) / 2.0;
  const double triples = pairs * (dk - 2.0) / 3.0;
  const double other_pairs = (dk - 2.0) * (dk - 3.0) / 2.0;
  // Each triple of balls holds three pairs of pairs sharing one ball.
  return pairs * c2 - 3.0 * triples * c3 - 0.5 * pairs * other_pairs * c2 * c2;
}

TriangularKernel::TriangularKernel(ProbabilityVector p, RowMethod method)
    : p_(std::move(p)), method_(method) {
  rows_.reserve(p_.size() + 1);
  rows_.resize(p_.size() + 1);
}

const TransitionRow& TriangularKernel::row(std::size_t k) const {
  if (k < 1 || k > p_.size()) throw ValidationError("kernel row index out of range");
  std::lock_guard lock(mutex_);
  if (k > computed_) {
    auto fresh = transition_table(p_, k, method_);
    for (std::size_t j = computed_ + 1; j <= k; ++j) rows_[j] = std::move(fresh[j]);
    computed_ = k;
  }
  return rows_[k];
}

void TriangularKernel::materialize() const { (void)row(p_.size()); }

std::vector<double> expected_coalescence_times(const TriangularKernel& kernel) {
  kernel.materialize();
  const std::size_t n = kernel.size();
  std::vector<double> times(n + 1, 0.0);
  for (std::size_t m = 2; m <= n; ++m) {
    const TransitionRow& r = kernel.row(m);
    const double leave = r.leave_probability();
    if (!(leave > 0.0)) {
      std::ostringstream msg;
      msg << "state " << m << " is absorbing; the kernel is corrupt";
      throw NumericalError(msg.str(), leave);
    }
    double acc = 1.0;
    for (std::size_t b = 1; b < m; ++b) acc += r.at(b) * times[b];
    times[m] = acc / leave;
  }
  return times;
}

std::vector<double> coalescence_cdf(const TriangularKernel& kernel, std::size_t m,
                                    std::size_t t_max) {
  if (m < 1 || m > kernel.size()) throw ValidationError("coalescence_cdf needs 1 <= m <= n");
  std::vector<double> law(m + 1, 0.0);
  std::vector<double> next(m + 1, 0.0);
  law[m] = 1.0;
  std::vector<double> cdf;
  cdf.reserve(t_max + 1);
  cdf.push_back(law[1]);
  for (std::size_t t = 1; t <= t_max; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    next[1] = law[1];
    for (std::size_t k = 2; k <= m; ++k) {
      if (law[k] == 0.0) continue;
      const TransitionRow& r = kernel.row(k);
      for (std::size_t b = 1; b <= k; ++b) next[b] += law[k] * r.at(b);
    }
    std::swap(law, next);
    cdf.push_back(std::min(1.0, law[1]));
  }
  return cdf;
}

PhaseTimes phase_decomposition(const TriangularKernel& kernel, double k_star, double k_one) {
  const std::size_t n = kernel.size();
  const double dn = static_cast<double>(n);
  if (!(1.0 <= k_one && k_one <= k_star && k_star <= dn)) {
    throw ValidationError("phase_decomposition needs 1 <= k_one <= k_star <= n");
  }
  kernel.materialize();
  std::vector<double> visit(n + 1, 0.0);
  visit[n] = 1.0;
  PhaseTimes phases;
  for (std::size_t k = n; k >= 2; --k) {
    if (visit[k] == 0.0) continue;
    const TransitionRow& r = kernel.row(k);
    const double leave = r.leave_probability();
    if (!(leave > 0.0)) throw NumericalError("absorbing state above 1 in kernel", leave);
    const double time = visit[k] / leave;
    const double dk = static_cast<double>(k);
    if (dk > k_star) {
      phases.early += time;
    } else if (dk > k_one) {
      phases.middle += time;
    } else {
      phases.late += time;
    }
    for (std::size_t b = 1; b < k; ++b) visit[b] += visit[k] * r.at(b) / leave;
  }
  return phases;
}

void write_kernel_csv(std::ostream& out, const TriangularKernel& kernel) {
  CsvWriter csv(out, {"k", "b", "prob"});
  for (std::size_t k = 1; k <= kernel.size(); ++k) {
    const TransitionRow& r = kernel.row(k);
    for (std::size_t b = 1; b <= k; ++b) {
      csv.cell(k).cell(b).cell(r.at(b));
      csv.end_row();
    }
  }
}

}  // namespace coalesce
