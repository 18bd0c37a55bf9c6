#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <ostream>
#include <vector>

#include "coalesce/distributions.hpp"

namespace coalesce {

/// Law of the next ball count given k balls: probs[b] = P(B(t+1) = b | B(t) = k)
/// for b = 0..k (probs[0] is always 0).
struct TransitionRow {
  std::size_t k = 0;
  std::vector<double> probs;

  double at(std::size_t b) const noexcept { return b < probs.size() ? probs[b] : 0.0; }
  double total() const noexcept;
  double mean() const noexcept;
  /// P(B(t+1) < k | B(t) = k), summed from the strict-decrease side.
  double leave_probability() const noexcept;
};

enum class RowMethod {
  grouped,  ///< boxes with equal weight handled as one block (default)
  per_box,  ///< every box folded in individually, in stored order
};

/// Rows for k = 0..k_max (entry 0 is empty) from one occupancy DP.
///
/// The DP folds boxes into a table d[s][b] = P(s balls occupy exactly b of the
/// boxes seen so far | all s balls land in those boxes). This is s! times the
/// coefficient of x^s z^b in prod_j (1 + z (exp(p_j x / P) - 1)), P the mass
/// folded so far; the rescaling keeps every entry a probability, so no
/// intermediate quantity overflows and underflow only drops mass below 1e-308.
std::vector<TransitionRow> transition_table(const ProbabilityVector& p, std::size_t k_max,
                                            RowMethod method = RowMethod::grouped);

TransitionRow transition_row(const ProbabilityVector& p, std::size_t k,
                             RowMethod method = RowMethod::grouped);

struct Tails {
  double below;  ///< P(B(t+1) < b)
  double above;  ///< P(B(t+1) > b)
};

Tails tails(const TransitionRow& row, std::size_t b);

/// Inclusion-exclusion lower bound on 1 - pi_kk:
/// C(k,2) c2 - 3 C(k,3) c3 - C(k,2) C(k-2,2) c2^2 / 2. May be negative.
double collision_gap_lower_bound(const ProbabilityVector& p, std::size_t k);

/// Lower-triangular kernel pi_kb, k = 1..n. Rows are computed on demand by one
/// DP pass up to the largest requested k and cached write-once; safe to share.
class TriangularKernel {
 public:
  explicit TriangularKernel(ProbabilityVector p, RowMethod method = RowMethod::grouped);

  const ProbabilityVector& source() const noexcept { return p_; }
  std::size_t size() const noexcept { return p_.size(); }

  const TransitionRow& row(std::size_t k) const;
  /// Computes every row.
  void materialize() const;

 private:
  ProbabilityVector p_;
  RowMethod method_;
  mutable std::mutex mutex_;
  mutable std::vector<TransitionRow> rows_;  // reserved to n+1, never reallocated
  mutable std::size_t computed_ = 0;
};

/// E[T(m)] for m = 0..n (entry 0 and 1 are 0), by triangular back-substitution.
/// Throws NumericalError if some state m >= 2 cannot be left.
std::vector<double> expected_coalescence_times(const TriangularKernel& kernel);

/// P(T(m) <= t) for t = 0..t_max by pushing the state law through the kernel.
std::vector<double> coalescence_cdf(const TriangularKernel& kernel, std::size_t m,
                                    std::size_t t_max);

struct PhaseTimes {
  double early = 0.0;   ///< states k > k_star
  double middle = 0.0;  ///< k_one < k <= k_star
  double late = 0.0;    ///< 2 <= k <= k_one
  double total() const noexcept { return early + middle + late; }
};

/// Expected time spent in each phase when started from n balls. The time at
/// state k is v_k / (1 - pi_kk) with v_k the visit probability of the jump chain.
PhaseTimes phase_decomposition(const TriangularKernel& kernel, double k_star, double k_one);

/// Kernel as CSV with columns k,b,prob (rows with prob = 0 above the diagonal omitted).
void write_kernel_csv(std::ostream& out, const TriangularKernel& kernel);

}  // namespace coalesce
