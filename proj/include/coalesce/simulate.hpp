#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "coalesce/distributions.hpp"
#include "coalesce/random.hpp"
#include "coalesce/statistics.hpp"

namespace coalesce {

/// Walker/Vose alias table: O(n) setup, O(1) draws.
class AliasTable {
 public:
  explicit AliasTable(std::span<const double> weights);

  std::size_t size() const noexcept { return cutoff_.size(); }

  std::size_t sample(RandomStream& rng) const noexcept {
    const double u = rng.uniform() * static_cast<double>(cutoff_.size());
    const auto i = static_cast<std::size_t>(u);
    return (u - static_cast<double>(i)) < cutoff_[i] ? i : alias_[i];
  }

 private:
  std::vector<double> cutoff_;
  std::vector<std::uint32_t> alias_;
};

struct SimConfig {
  ProbabilityVector p;
  std::size_t b0 = 0;  ///< starting ball count; 0 means n
  std::size_t replicates = 1;
  std::uint64_t master_seed = 0;
  bool record_trajectory = false;
  std::vector<double> passage_thresholds;  ///< each >= 1; tau(x) = min{t : B(t) <= x}
};

struct RunResult {
  std::size_t coalescence_time = 0;  ///< T = tau(1)
  std::optional<std::vector<std::uint32_t>> trajectory;  ///< B(0..T) when recorded
  std::vector<std::size_t> passages;  ///< aligned with SimConfig::passage_thresholds
};

struct BatchResult {
  SummaryStats coalescence;
  std::vector<SummaryStats> passages;
  std::vector<RunResult> runs;  ///< indexed by replicate
};

/// Scratch for distinct-box counting; one per worker.
class StepWorkspace {
 public:
  explicit StepWorkspace(std::size_t n) : stamp_(n, 0) {}

 private:
  friend class Simulator;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t generation_ = 0;
};

/// Monte Carlo engine for the coalescence process. Replicate i always uses
/// the stream RandomStream(master_seed, i), so every result is independent of
/// the worker count and of the order in which replicates are run.
class Simulator {
 public:
  explicit Simulator(SimConfig config);

  const SimConfig& config() const noexcept { return config_; }
  std::size_t start_count() const noexcept { return start_; }

  /// Throws k balls, returns the number of distinct boxes hit.
  std::size_t step(std::size_t k, RandomStream& rng, StepWorkspace& ws) const;

  RunResult run(std::size_t replicate) const;
  RunResult run(std::size_t replicate, StepWorkspace& ws) const;

  BatchResult batch(std::size_t threads = 0) const;

 private:
  SimConfig config_;
  AliasTable table_;
  std::size_t start_;
};

/// Number of steps with B(t) >= k_star and B(t+1) > Psi(B(t)).
/// Throws ValidationError when the run has no recorded trajectory.
std::size_t delta_audit(const RunResult& result, const ProbabilityVector& p, double k_star);

/// Per-replicate CSV: replicate,T,tau@<threshold>...
void write_runs_csv(std::ostream& out, const SimConfig& config, const BatchResult& batch);

}  // namespace coalesce
