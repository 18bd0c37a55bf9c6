#include "coalesce/simulate.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "coalesce/csv.hpp"
#include "coalesce/dynamics.hpp"
#include "coalesce/errors.hpp"
#include "coalesce/parallel.hpp"

namespace coalesce {

AliasTable::AliasTable(std::span<const double> weights)
    : cutoff_(weights.size(), 0.0), alias_(weights.size(), 0) {
  const std::size_t n = weights.size();
  if (n == 0 || n > std::numeric_limits<std::uint32_t>::max()) {
    throw ValidationError("alias table size out of range");
  }
  double total = 0.0;
  for (double w : weights) total += w;

  std::vector<double> scaled(n);
  std::vector<std::uint32_t> small;
  std::vector<std::uint32_t> large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = weights[i] * static_cast<double>(n) / total;
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const std::uint32_t s = small.back();
    small.pop_back();
    const std::uint32_t l = large.back();
    cutoff_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  // Leftovers are full columns up to rounding.
  for (auto i : large) {
    cutoff_[i] = 1.0;
    alias_[i] = i;
  }
  for (auto i : small) {
    cutoff_[i] = 1.0;
    alias_[i] = i;
  }
}

Simulator::Simulator(SimConfig config)
    : config_(std::move(config)), table_(config_.p.weights()), start_(config_.b0) {
  const std::size_t n = config_.p.size();
  if (start_ == 0) start_ = n;
  if (start_ < 1 || start_ > n) throw ValidationError("start count must satisfy 1 <= b0 <= n");
  if (config_.replicates < 1) throw ValidationError("replicates must be at least 1");
  for (double x : config_.passage_thresholds) {
    if (!(x >= 1.0)) throw ValidationError("passage thresholds must be >= 1");
  }
  if (n >= std::numeric_limits<std::uint32_t>::max()) throw ValidationError("n too large");
}

std::size_t Simulator::step(std::size_t k, RandomStream& rng, StepWorkspace& ws) const {
  if (k <= 1) return k;
  if (++ws.generation_ == 0) {
    std::fill(ws.stamp_.begin(), ws.stamp_.end(), 0);
    ws.generation_ = 1;
  }
  const std::uint32_t gen = ws.generation_;
  std::size_t distinct = 0;
  for (std::size_t ball = 0; ball < k; ++ball) {
    const std::size_t box = table_.sample(rng);
    if (ws.stamp_[box] != gen) {
      ws.stamp_[box] = gen;
      ++distinct;
    }
  }
  return distinct;
}

RunResult Simulator::run(std::size_t replicate) const {
  StepWorkspace ws(config_.p.size());
  return run(replicate, ws);
}

RunResult Simulator::run(std::size_t replicate, StepWorkspace& ws) const {
  RandomStream rng(config_.master_seed, replicate);
  const auto& thresholds = config_.passage_thresholds;
  constexpr std::size_t kPending = std::numeric_limits<std::size_t>::max();

  RunResult result;
  result.passages.assign(thresholds.size(), kPending);
  if (config_.record_trajectory) result.trajectory.emplace();

  std::size_t balls = start_;
  std::size_t t = 0;
  std::size_t pending = thresholds.size();
  auto observe = [&] {
    if (result.trajectory) result.trajectory->push_back(static_cast<std::uint32_t>(balls));
    if (pending == 0) return;
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      if (result.passages[i] == kPending && static_cast<double>(balls) <= thresholds[i]) {
        result.passages[i] = t;
        --pending;
      }
    }
  };

  observe();
  while (balls > 1) {
    balls = step(balls, rng, ws);
    ++t;
    observe();
  }
  result.coalescence_time = t;
  return result;
}

BatchResult Simulator::batch(std::size_t threads) const {
  const std::size_t reps = config_.replicates;
  const std::size_t workers = std::min(resolve_threads(threads), reps);
  BatchResult out;
  out.runs.resize(reps);
  std::vector<StepWorkspace> spaces(workers, StepWorkspace(config_.p.size()));
  parallel_for(reps, workers,
               [&](std::size_t w, std::size_t i) { out.runs[i] = run(i, spaces[w]); });

  out.passages.resize(config_.passage_thresholds.size());
  for (const auto& r : out.runs) {
    out.coalescence.add(static_cast<double>(r.coalescence_time));
    for (std::size_t i = 0; i < r.passages.size(); ++i) {
      out.passages[i].add(static_cast<double>(r.passages[i]));
    }
  }
  return out;
}

std::size_t delta_audit(const RunResult& result, const ProbabilityVector& p, double k_star) {
  if (!result.trajectory) throw ValidationError("delta_audit needs a recorded trajectory");
  const auto& traj = *result.trajectory;
  std::size_t violations = 0;
  for (std::size_t t = 0; t + 1 < traj.size(); ++t) {
    const double now = traj[t];
    if (now >= k_star && static_cast<double>(traj[t + 1]) > midpoint_envelope(p, now)) {
      ++violations;
    }
  }
  return violations;
}

void write_runs_csv(std::ostream& out, const SimConfig& config, const BatchResult& batch) {
  std::vector<std::string> header{"replicate", "T"};
  for (double x : config.passage_thresholds) header.push_back("tau@" + format_double(x));
  CsvWriter csv(out, header);
  for (std::size_t i = 0; i < batch.runs.size(); ++i) {
    csv.cell(i).cell(batch.runs[i].coalescence_time);
    for (std::size_t tau : batch.runs[i].passages) csv.cell(tau);
    csv.end_row();
  }
}

}  // namespace coalesce
