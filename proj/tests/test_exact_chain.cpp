#include <doctest.h>

#include <cmath>
#include <sstream>
#include <thread>

#include "coalesce/dynamics.hpp"
#include "coalesce/errors.hpp"
#include "coalesce/exact_chain.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace coalesce;

namespace {

std::vector<std::vector<double>> rows_of(const TriangularKernel& kernel) {
  std::vector<std::vector<double>> rows(kernel.size() + 1);
  for (std::size_t k = 1; k <= kernel.size(); ++k) rows[k] = kernel.row(k).probs;
  return rows;
}

}  // namespace

TEST_SUITE("exact_chain") {
  TEST_CASE("small rows by hand") {
    const auto r2 = transition_row(ProbabilityVector::uniform(2), 2);
    CHECK(r2.at(1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r2.at(2) == doctest::Approx(0.5).epsilon(1e-15));
    const auto r3 = transition_row(ProbabilityVector::uniform(3), 3);
    CHECK(r3.at(1) == doctest::Approx(1.0 / 9.0).epsilon(1e-14));
    CHECK(r3.at(2) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(r3.at(3) == doctest::Approx(2.0 / 9.0).epsilon(1e-14));
    const auto r = transition_row(ProbabilityVector::new_checked({0.75, 0.25}), 2);
    CHECK(r.at(1) == doctest::Approx(5.0 / 8.0).epsilon(1e-15));
    CHECK(r.at(2) == doctest::Approx(3.0 / 8.0).epsilon(1e-15));
    CHECK(r.at(0) == 0.0);
    CHECK_THROWS_AS(transition_row(ProbabilityVector::uniform(3), 4), ValidationError);
  }

  TEST_CASE("uniform rows match surjection counts") {
    for (std::size_t n = 1 + 1; n <= 10; ++n) {
      for (std::size_t k = 1; k <= n; ++k) {
        const auto want = oracle::uniform_row(n, k);
        for (auto method : {RowMethod::grouped, RowMethod::per_box}) {
          const auto got = transition_row(ProbabilityVector::uniform(n), k, method);
          for (std::size_t b = 0; b <= k; ++b) CHECK(std::abs(got.at(b) - want.at(b)) <= 1e-12);
        }
      }
    }
    // Closed forms at the ends of a row.
    const auto row = oracle::uniform_row(7, 7);
    CHECK(row.at(7) == doctest::Approx(5040.0 / 823543.0).epsilon(1e-14));
    CHECK(row.at(1) == doctest::Approx(std::pow(7.0, -6.0)).epsilon(1e-14));
  }

  TEST_CASE("rows match full enumeration for arbitrary weights") {
    RandomStream rng(31);
    for (int i = 0; i < 40; ++i) {
      const std::size_t n = 2 + rng.below(4);
      const auto p = testing::random_vector(n, rng, true);
      for (std::size_t k = 1; k <= n; ++k) {
        const auto want = oracle::enumerated_row(p, k);
        for (auto method : {RowMethod::grouped, RowMethod::per_box}) {
          const auto got = transition_row(p, k, method);
          for (std::size_t b = 0; b <= k; ++b) CHECK(std::abs(got.at(b) - want[b]) <= 1e-12);
        }
      }
    }
    // Repeated values exercise the grouped path.
    const auto t = topheavy(5, 0.4);
    for (std::size_t k = 1; k <= 5; ++k) {
      const auto want = oracle::enumerated_row(t, k);
      const auto got = transition_row(t, k);
      for (std::size_t b = 0; b <= k; ++b) CHECK(std::abs(got.at(b) - want[b]) <= 1e-12);
    }
  }

  TEST_CASE("row sums and means") {
    RandomStream rng(32);
    for (int i = 0; i < 30; ++i) {
      const std::size_t n = 2 + rng.below(49);
      const auto p = testing::random_vector(n, rng, true);
      const auto table = transition_table(p, n);
      for (std::size_t k = 1; k <= n; ++k) {
        CHECK(std::abs(table[k].total() - 1.0) <= 1e-10);
        CHECK(std::abs(table[k].mean() - expected_next(p, k)) <= 1e-9);
        for (double x : table[k].probs) CHECK(x >= 0.0);
      }
    }
  }

  TEST_CASE("large rows stay normalized") {
    for (const auto& p : {ProbabilityVector::uniform(2000), topheavy(2000, 0.01)}) {
      const auto row = transition_row(p, 2000);
      CHECK(std::abs(row.total() - 1.0) <= 1e-10);
      CHECK(std::abs(row.mean() - expected_next(p, 2000)) <= 1e-7);
    }
  }

  TEST_CASE("tails") {
    const auto r3 = transition_row(ProbabilityVector::uniform(3), 3);
    const auto t = tails(r3, 2);
    CHECK(t.below == doctest::Approx(1.0 / 9.0).epsilon(1e-14));
    CHECK(t.above == doctest::Approx(2.0 / 9.0).epsilon(1e-14));
    CHECK(tails(r3, 1).below == 0.0);
    CHECK(tails(r3, 3).above == 0.0);
    for (std::size_t b = 1; b <= 3; ++b) {
      const auto tb = tails(r3, b);
      CHECK(std::abs(tb.below + r3.at(b) + tb.above - 1.0) <= 1e-10);
    }
  }

  TEST_CASE("inclusion-exclusion lower bound") {
    const auto p = ProbabilityVector::new_checked({0.5, 0.3, 0.2});
    CHECK(collision_gap_lower_bound(p, 2) == doctest::Approx(moments(p).c2).epsilon(1e-15));
    for (std::size_t n = 3; n <= 10; ++n) {
      const double dn = static_cast<double>(n);
      const auto u = ProbabilityVector::uniform(n);
      CHECK(collision_gap_lower_bound(u, 3) == doctest::Approx(3.0 / dn - 3.0 / (dn * dn)).epsilon(1e-13));
      // exact: 1 - (n-1)(n-2)/n^2
      CHECK(1.0 - transition_row(u, 3).at(3) == doctest::Approx(3.0 / dn - 2.0 / (dn * dn)).epsilon(1e-12));
    }
    RandomStream rng(33);
    for (int i = 0; i < 50; ++i) {
      const std::size_t n = 2 + rng.below(9);
      const auto q = testing::random_vector(n, rng);
      const TriangularKernel kernel(q);
      for (std::size_t k = 2; k <= n; ++k) {
        const double bound = collision_gap_lower_bound(q, k);
        if (bound >= 0.0) CHECK(bound <= 1.0 - kernel.row(k).at(k) + 1e-12);
      }
    }
  }

  TEST_CASE("self-loop probability decreases in k") {
    RandomStream rng(34);
    for (int i = 0; i < 50; ++i) {
      const std::size_t n = 2 + rng.below(11);
      const TriangularKernel kernel(testing::random_vector(n, rng));
      CHECK(kernel.row(1).at(1) == doctest::Approx(1.0).epsilon(1e-15));
      for (std::size_t k = 2; k <= n; ++k) CHECK(kernel.row(k).at(k) < kernel.row(k - 1).at(k - 1));
    }
  }

  TEST_CASE("expected coalescence times") {
    const auto e2 = expected_coalescence_times(TriangularKernel(ProbabilityVector::uniform(2)));
    CHECK(std::abs(e2[2] - 2.0) <= 1e-12);
    const auto e = expected_coalescence_times(
        TriangularKernel(ProbabilityVector::new_checked({0.75, 0.25})));
    CHECK(std::abs(e[2] - 1.6) <= 1e-12);
    CHECK(e[1] == 0.0);
    const auto point = expected_coalescence_times(
        TriangularKernel(ProbabilityVector::new_checked({1.0, 0.0, 0.0, 0.0})));
    for (std::size_t m = 2; m <= 4; ++m) CHECK(point[m] == doctest::Approx(1.0));
  }

  TEST_CASE("expected times agree with a dense solve and are monotone") {
    RandomStream rng(35);
    for (int i = 0; i < 40; ++i) {
      const std::size_t n = 2 + rng.below(11);
      const TriangularKernel kernel(testing::random_vector(n, rng, true));
      const auto got = expected_coalescence_times(kernel);
      const auto want = oracle::dense_expected_times(rows_of(kernel));
      for (std::size_t m = 2; m <= n; ++m) {
        CHECK(std::abs(got[m] - want[m]) <= 1e-9 * std::max(1.0, want[m]));
        CHECK(got[m] >= got[m - 1] - 1e-12);
      }
    }
    for (std::size_t n = 2; n <= 12; ++n) {
      const auto et = expected_coalescence_times(TriangularKernel(ProbabilityVector::uniform(n)));
      CHECK(et[n] <= 2.0 * static_cast<double>(n) - 2.0 + 1e-12);
    }
  }

  TEST_CASE("coalescence-time distribution") {
    const TriangularKernel two(ProbabilityVector::uniform(2));
    const auto cdf = coalescence_cdf(two, 2, 30);
    for (std::size_t t = 0; t <= 30; ++t) {
      CHECK(std::abs(cdf[t] - (1.0 - std::ldexp(1.0, -static_cast<int>(t)))) <= 1e-15);
    }
    CHECK(coalescence_cdf(two, 1, 3)[0] == 1.0);
    CHECK(cdf[0] == 0.0);

    const TriangularKernel kernel(topheavy(9, 0.3));
    const auto c = coalescence_cdf(kernel, 9, 400);
    double tail_sum = 0.0;
    for (std::size_t t = 0; t < c.size(); ++t) {
      if (t > 0) CHECK(c[t] >= c[t - 1]);
      CHECK(c[t] <= 1.0 + 1e-15);
      tail_sum += 1.0 - c[t];
    }
    CHECK(std::abs(tail_sum - expected_coalescence_times(kernel)[9]) <= 1e-8);
  }

  TEST_CASE("phase decomposition") {
    const TriangularKernel ten(ProbabilityVector::uniform(10));
    const double total = expected_coalescence_times(ten)[10];
    const auto all_late = phase_decomposition(ten, 10.0, 10.0);
    CHECK(all_late.early == 0.0);
    CHECK(all_late.middle == 0.0);
    CHECK(std::abs(all_late.late - total) <= 1e-8);
    const auto split = phase_decomposition(ten, 5.0, 3.0);
    CHECK(std::abs(split.total() - total) <= 1e-8);
    CHECK(split.early > 0.0);
    CHECK(split.middle > 0.0);

    const std::size_t n = 100;
    const double c2 = 1.0 / static_cast<double>(n);
    const double ks = early_threshold(c2, n, 0.2);
    const double k1 = late_threshold(c2, n, 0.2);
    const auto ph = phase_decomposition(TriangularKernel(ProbabilityVector::uniform(n)), ks, k1);
    double bound = 1.0;
    for (std::size_t k = 2; k <= static_cast<std::size_t>(k1); ++k) {
      bound += 1.1 / (c2 * static_cast<double>(k * (k - 1) / 2));
    }
    CHECK(ph.late <= bound);
  }

  TEST_CASE("kernel is shareable across threads") {
    const TriangularKernel kernel(ProbabilityVector::uniform(60));
    std::vector<std::thread> workers;
    std::vector<double> sums(4, 0.0);
    for (std::size_t w = 0; w < 4; ++w) {
      workers.emplace_back([&, w] {
        for (std::size_t k = 60; k >= 1; --k) sums[w] += kernel.row(k).total();
      });
    }
    for (auto& t : workers) t.join();
    for (double s : sums) CHECK(std::abs(s - 60.0) <= 1e-9);
  }

  TEST_CASE("kernel csv") {
    std::ostringstream out;
    write_kernel_csv(out, TriangularKernel(ProbabilityVector::uniform(2)));
    CHECK(out.str().rfind("k,b,prob\n", 0) == 0);
    CHECK(out.str().find("2,1,0.5") != std::string::npos);
  }
}
