#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "coalesce/descriptor.hpp"
#include "coalesce/distributions.hpp"
#include "coalesce/errors.hpp"
#include "helpers.hpp"

using namespace coalesce;

TEST_SUITE("distributions") {
  TEST_CASE("construction accepts normalized input and rejects bad input") {
    const auto p = ProbabilityVector::new_checked({0.5, 0.5});
    CHECK(p.size() == 2);
    const auto q = ProbabilityVector::new_checked({2.0, 2.0}, true);
    CHECK(q[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(q[1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(ProbabilityVector::new_checked({0.5, -0.1, 0.6}), ValidationError);
    CHECK_THROWS_AS(ProbabilityVector::new_checked({0.0, 0.0}, true), ValidationError);
    CHECK_THROWS_AS(ProbabilityVector::new_checked({0.3, 0.3}), ValidationError);
    CHECK_THROWS_AS(ProbabilityVector::new_checked({1.0}), ValidationError);
    // Input noise below 1e-9 is accepted and removed.
    const auto r = ProbabilityVector::new_checked({0.5 + 4e-10, 0.5});
    double sum = 0.0;
    for (double x : r.weights()) sum += x;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }

  TEST_CASE("sorted view leaves stored order alone") {
    const auto p = ProbabilityVector::new_checked({0.1, 0.6, 0.3});
    const auto s = p.sorted_descending();
    CHECK(s == std::vector<double>{0.6, 0.3, 0.1});
    CHECK(p[0] == 0.1);
    const auto runs = ProbabilityVector::uniform(7).runs();
    REQUIRE(runs.size() == 1);
    CHECK(runs[0].multiplicity == 7);
    CHECK(topheavy(9, 0.3).runs().size() == 2);
    CHECK(ProbabilityVector::new_checked({1.0, 0.0, 0.0}).support_size() == 1);
  }

  TEST_CASE("moments of small vectors") {
    const auto u = moments(ProbabilityVector::uniform(4));
    CHECK(u.c2 == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(u.c3 == doctest::Approx(0.0625).epsilon(1e-15));
    const auto m = moments(ProbabilityVector::new_checked({0.75, 0.25}));
    CHECK(m.c2 == doctest::Approx(5.0 / 8.0).epsilon(1e-15));
    CHECK(m.c3 == doctest::Approx(7.0 / 16.0).epsilon(1e-15));
    const auto point = moments(ProbabilityVector::new_checked({1.0, 0.0}));
    CHECK(point.c2 == 1.0);
    CHECK(point.c3 == 1.0);
  }

  TEST_CASE("moment chain holds on random vectors") {
    RandomStream rng(101);
    for (int i = 0; i < 10000; ++i) {
      const std::size_t n = 2 + rng.below(30);
      const auto p = testing::random_vector(n, rng, true);
      const auto m = moments(p);
      double sum = 0.0;
      for (double x : p.weights()) {
        CHECK(x >= 0.0);
        sum += x;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
      CHECK(m.c2 >= 1.0 / static_cast<double>(n) - 1e-12);
      CHECK(m.c3 >= m.c2 * m.c2 - 1e-12);
      CHECK(m.c3 <= std::pow(m.c2, 1.5) + 1e-12);
    }
  }

  TEST_CASE("topheavy closed form") {
    const auto two = topheavy(2, 5.0 / 8.0);
    CHECK(two[0] == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(two[1] == doctest::Approx(0.25).epsilon(1e-14));
    const auto flat = topheavy(7, 1.0 / 7.0);
    for (double x : flat.weights()) CHECK(x == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
    const auto point = topheavy(3, 1.0);
    CHECK(point[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(point[1] == doctest::Approx(0.0));
    CHECK_THROWS_AS(topheavy(5, 0.1), ValidationError);
    CHECK_THROWS_AS(topheavy(5, 1.5), ValidationError);
  }

  TEST_CASE("topheavy reproduces c2 with one big entry") {
    for (std::size_t n : {3u, 10u, 100u, 10000u}) {
      for (double frac : {0.01, 0.2, 0.5, 0.9}) {
        const double lo = 1.0 / static_cast<double>(n);
        const double c2 = lo + frac * (1.0 - lo);
        const auto t = topheavy(n, c2);
        double sum = 0.0;
        for (double x : t.weights()) sum += x;
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        CHECK(std::abs(moments(t).c2 - c2) <= 1e-12);
        CHECK(t[0] > t[1]);
        for (std::size_t j = 2; j < n; ++j) CHECK(t[j] == t[1]);
      }
    }
  }

  TEST_CASE("three-level inversion recovers a seed vector") {
    const auto seed = ProbabilityVector::new_checked({0.4, 0.4, 0.15, 0.05});
    const auto m = moments(seed);
    CHECK(m.c2 == doctest::Approx(0.345).epsilon(1e-14));
    CHECK(m.c3 == doctest::Approx(0.1315).epsilon(1e-14));
    const auto all = three_level_all(4, m.c2, m.c3, 2);
    bool found = false;
    for (const auto& r : all) {
      const auto rm = moments(r);
      CHECK(std::abs(rm.c2 - m.c2) <= 1e-9);
      CHECK(std::abs(rm.c3 - m.c3) <= 1e-9);
      const auto s = r.sorted_descending();
      found = found || (std::abs(s[0] - 0.4) < 1e-7 && std::abs(s[1] - 0.4) < 1e-7 &&
                        std::abs(s[2] - 0.15) < 1e-7 && std::abs(s[3] - 0.05) < 1e-7);
    }
    CHECK(found);
    const auto first = three_level(4, 0.345, 0.1315, 2);
    CHECK(std::abs(moments(first).c3 - 0.1315) <= 1e-9);
  }

  TEST_CASE("three-level output has the singleton-middle shape") {
    RandomStream rng(7);
    int solved = 0;
    for (int i = 0; i < 200; ++i) {
      const std::size_t n = 4 + rng.below(6);
      const auto m = moments(testing::random_vector(n, rng));
      for (std::size_t nu = 1; nu + 2 <= n; ++nu) {
        try {
          const auto r = three_level(n, m.c2, m.c3, nu);
          ++solved;
          const auto w = testing::copy_weights(r);
          CHECK(std::is_sorted(w.rbegin(), w.rend()));
          for (std::size_t j = 1; j < nu; ++j) CHECK(w[j] == w[0]);
          for (std::size_t j = nu + 2; j < n; ++j) CHECK(w[j] == w[nu + 1]);
          CHECK(std::abs(moments(r).c2 - m.c2) <= 1e-9);
          CHECK(std::abs(moments(r).c3 - m.c3) <= 1e-9);
        } catch (const ValidationError&) {
          // infeasible nu for these moments
        }
      }
    }
    CHECK(solved > 100);
  }

  TEST_CASE("degenerate three-level request matches topheavy") {
    for (std::size_t n : {4u, 6u, 12u}) {
      const double c2 = 2.5 / static_cast<double>(n);
      const auto t = topheavy(n, c2);
      const auto r = three_level(n, c2, moments(t).c3, 1);
      for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(r[j] - t[j]) <= 1e-9);
    }
  }

  TEST_CASE("infeasible three-level requests are rejected") {
    CHECK_THROWS_AS(three_level(4, 0.3, 0.09, 1), ValidationError);
    CHECK_THROWS_AS(three_level(4, 0.3, 0.5, 1), ValidationError);
    CHECK_THROWS_AS(three_level(4, 0.3, 0.12, 3), ValidationError);
  }

  TEST_CASE("collision-class sampler hits its target") {
    RandomStream rng(2024);
    for (int i = 0; i < 1000; ++i) {
      const auto q = sample_with_collision(4, 0.3, rng);
      CHECK(std::abs(moments(q).c2 - 0.3) <= 1e-10);
    }
    for (std::size_t n : {2u, 5u, 50u}) {
      for (double c2 : {0.5, 0.9, 1.5 / static_cast<double>(n)}) {
        if (c2 < 1.0 / static_cast<double>(n)) continue;
        const auto q = sample_with_collision(n, c2, rng);
        CHECK(std::abs(moments(q).c2 - c2) <= 1e-10);
      }
    }
    const auto u = sample_with_collision(6, 1.0 / 6.0, rng);
    for (double x : u.weights()) CHECK(x == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  }

  TEST_CASE("collision-class sampler is not degenerate") {
    RandomStream rng(5);
    std::set<std::vector<std::size_t>> patterns;
    for (int i = 0; i < 1000; ++i) {
      const auto q = sample_with_collision(4, 0.3, rng);
      std::vector<std::size_t> order{0, 1, 2, 3};
      std::sort(order.begin(), order.end(), [&](auto a, auto b) { return q[a] > q[b]; });
      patterns.insert(order);
    }
    CHECK(patterns.size() >= 2);
  }

  TEST_CASE("descriptors round trip") {
    const auto u = distribution_from_json({{"family", "uniform"}, {"n", 10}});
    CHECK(u.size() == 10);
    const auto t = distribution_from_json({{"family", "topheavy"}, {"n", 100}, {"c2", 0.05}});
    CHECK(std::abs(moments(t).c2 - 0.05) <= 1e-12);
    const auto r = distribution_from_json(
        {{"family", "three_level"}, {"n", 4}, {"c2", 0.345}, {"c3", 0.1315}, {"nu", 2}});
    CHECK(std::abs(moments(r).c3 - 0.1315) <= 1e-9);
    const auto e = distribution_from_json({{"family", "explicit"}, {"weights", {0.75, 0.25}}});
    CHECK(e[0] == 0.75);
    const auto back = distribution_from_json(distribution_to_json(e));
    CHECK(back[1] == 0.25);
    CHECK_THROWS_AS(distribution_from_json({{"family", "nope"}}), ValidationError);
    CHECK_THROWS_AS(distribution_from_json({{"family", "topheavy"}, {"n", 5}, {"c2", 2.0}}),
                    ValidationError);
    CHECK_THROWS_AS(distribution_from_json({{"family", "uniform"}}), ValidationError);
  }
}
