#include <doctest.h>

#include <cmath>
#include <sstream>

#include "coalesce/dynamics.hpp"
#include "coalesce/errors.hpp"
#include "coalesce/exact_chain.hpp"
#include "coalesce/simulate.hpp"
#include "coalesce/statistics.hpp"
#include "helpers.hpp"

using namespace coalesce;

namespace {

SimConfig config_for(const ProbabilityVector& p, std::size_t replicates, std::uint64_t seed) {
  SimConfig c{p, 0, replicates, seed, false, {}};
  return c;
}

}  // namespace

TEST_SUITE("simulate") {
  TEST_CASE("alias table frequencies") {
    const std::vector<double> w{0.5, 0.2, 0.15, 0.1, 0.05, 0.0};
    const AliasTable table(w);
    CHECK(table.size() == 6);
    RandomStream rng(77);
    std::vector<double> counts(w.size(), 0.0);
    const std::size_t draws = 200000;
    for (std::size_t i = 0; i < draws; ++i) counts[table.sample(rng)] += 1.0;
    CHECK(counts[5] == 0.0);
    const auto r = chi_square_test(counts, w);
    CHECK(r.p_value > 1e-4);
    CHECK_THROWS_AS(AliasTable(std::vector<double>{}), ValidationError);
  }

  TEST_CASE("alias table on a skewed vector") {
    const auto p = topheavy(50, 0.3);
    const AliasTable table(p.weights());
    RandomStream rng(78);
    std::vector<double> counts(50, 0.0);
    for (int i = 0; i < 100000; ++i) counts[table.sample(rng)] += 1.0;
    CHECK(chi_square_test(counts, p.weights()).p_value > 1e-4);
  }

  TEST_CASE("one step matches the exact row") {
    for (const auto& p : {ProbabilityVector::uniform(8), topheavy(8, 0.3),
                          ProbabilityVector::new_checked({0.4, 0.3, 0.1, 0.1, 0.05, 0.05})}) {
      const std::size_t k = p.size();
      const Simulator sim(config_for(p, 1, 1));
      StepWorkspace ws(p.size());
      RandomStream rng(99);
      std::vector<double> counts(k + 1, 0.0);
      for (int i = 0; i < 100000; ++i) counts[sim.step(k, rng, ws)] += 1.0;
      const auto row = transition_row(p, k);
      CHECK(counts[0] == 0.0);
      CHECK(chi_square_test(counts, row.probs).p_value > 1e-4);
    }
  }

  TEST_CASE("edge cases") {
    const Simulator point(config_for(ProbabilityVector::new_checked({1.0, 0.0, 0.0}), 5, 3));
    for (std::size_t i = 0; i < 5; ++i) CHECK(point.run(i).coalescence_time == 1);

    SimConfig one = config_for(ProbabilityVector::uniform(4), 3, 3);
    one.b0 = 1;
    CHECK(Simulator(one).run(0).coalescence_time == 0);

    SimConfig high = config_for(ProbabilityVector::uniform(20), 10, 3);
    high.passage_thresholds = {20.0, 25.0};
    for (const auto& r : Simulator(high).batch(1).runs) CHECK(r.passages == std::vector<std::size_t>{0, 0});

    SimConfig bad = config_for(ProbabilityVector::uniform(4), 3, 3);
    bad.b0 = 9;
    CHECK_THROWS_AS(Simulator{bad}, ValidationError);
    SimConfig bad_threshold = config_for(ProbabilityVector::uniform(4), 3, 3);
    bad_threshold.passage_thresholds = {0.5};
    CHECK_THROWS_AS(Simulator{bad_threshold}, ValidationError);
  }

  TEST_CASE("trajectories are non-increasing and end at one") {
    SimConfig c = config_for(topheavy(30, 0.2), 20, 4);
    c.record_trajectory = true;
    c.passage_thresholds = {1.0, 5.0, 12.5};
    const auto batch = Simulator(c).batch(2);
    REQUIRE(batch.runs.size() == 20);
    for (const auto& r : batch.runs) {
      REQUIRE(r.trajectory.has_value());
      const auto& tr = *r.trajectory;
      CHECK(tr.front() == 30);
      CHECK(tr.back() == 1);
      CHECK(tr.size() == r.coalescence_time + 1);
      for (std::size_t t = 1; t < tr.size(); ++t) CHECK(tr[t] <= tr[t - 1]);
      CHECK(r.passages[0] == r.coalescence_time);
      CHECK(r.passages[1] <= r.passages[0]);
      CHECK(r.passages[2] <= r.passages[1]);
      CHECK(tr[r.passages[2]] <= 12);
      if (r.passages[2] > 0) CHECK(tr[r.passages[2] - 1] > 12);
    }
  }

  TEST_CASE("batch mean matches the exact expectation") {
    const auto p = ProbabilityVector::new_checked({0.75, 0.25});
    const auto batch = Simulator(config_for(p, 40000, 12)).batch();
    const double se = *batch.coalescence.stderr_of_mean();
    CHECK(std::abs(batch.coalescence.mean() - 1.6) <= 4.0 * se);
    const auto u = ProbabilityVector::uniform(6);
    const double exact = expected_coalescence_times(TriangularKernel(u))[6];
    const auto b6 = Simulator(config_for(u, 40000, 13)).batch();
    CHECK(std::abs(b6.coalescence.mean() - exact) <= 4.0 * *b6.coalescence.stderr_of_mean());
  }

  TEST_CASE("results do not depend on the worker count") {
    SimConfig c = config_for(topheavy(40, 0.1), 300, 8);
    c.passage_thresholds = {3.0};
    const Simulator sim(c);
    const auto a = sim.batch(1);
    const auto b = sim.batch(3);
    const auto d = sim.batch(7);
    for (std::size_t i = 0; i < 300; ++i) {
      CHECK(a.runs[i].coalescence_time == b.runs[i].coalescence_time);
      CHECK(a.runs[i].coalescence_time == d.runs[i].coalescence_time);
      CHECK(a.runs[i].passages == d.runs[i].passages);
    }
    CHECK(a.coalescence.mean() == d.coalescence.mean());
    CHECK(a.coalescence.variance() == d.coalescence.variance());
    std::ostringstream sa, sd;
    write_runs_csv(sa, c, a);
    write_runs_csv(sd, c, d);
    CHECK(sa.str() == sd.str());
    CHECK(sa.str().rfind("replicate,T,tau@3\n", 0) == 0);
    // Replicate i is reproducible on its own.
    CHECK(sim.run(17).coalescence_time == a.runs[17].coalescence_time);
  }

  TEST_CASE("different seeds give different runs") {
    const auto a = Simulator(config_for(ProbabilityVector::uniform(50), 50, 1)).batch(1);
    const auto b = Simulator(config_for(ProbabilityVector::uniform(50), 50, 2)).batch(1);
    std::size_t same = 0;
    for (std::size_t i = 0; i < 50; ++i) same += a.runs[i].coalescence_time == b.runs[i].coalescence_time;
    CHECK(same < 50);
  }

  TEST_CASE("envelope audit") {
    const auto p = ProbabilityVector::uniform(200);
    RunResult fake;
    CHECK_THROWS_AS(delta_audit(fake, p, 10.0), ValidationError);
    const double psi = midpoint_envelope(p, 200.0);
    fake.trajectory = std::vector<std::uint32_t>{200, static_cast<std::uint32_t>(std::ceil(psi + 1.0)), 1};
    CHECK(delta_audit(fake, p, 10.0) == 1);
    fake.trajectory = std::vector<std::uint32_t>{200, static_cast<std::uint32_t>(std::floor(psi)), 1};
    CHECK(delta_audit(fake, p, 10.0) == 0);

    SimConfig c = config_for(ProbabilityVector::uniform(1000), 100, 21);
    c.record_trajectory = true;
    const auto batch = Simulator(c).batch();
    const double ks = early_threshold(1e-3, 1000, 0.2);
    std::size_t violations = 0;
    for (const auto& r : batch.runs) violations += delta_audit(r, c.p, ks);
    CHECK(violations == 0);
  }

  TEST_CASE("early passage stays below its bound") {
    for (const auto& p : {ProbabilityVector::uniform(2000), topheavy(2000, 0.02)}) {
      const double c2 = moments(p).c2;
      const double ks = early_threshold(c2, 2000, 0.2);
      SimConfig c = config_for(p, 200, 31);
      c.passage_thresholds = {ks};
      const auto batch = Simulator(c).batch();
      CHECK(batch.passages[0].mean() <= 5.0 / std::sqrt(c2) * std::log(2000.0));
    }
  }
}
