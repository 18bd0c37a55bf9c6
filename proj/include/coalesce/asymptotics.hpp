#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "coalesce/random.hpp"
#include "coalesce/statistics.hpp"

namespace coalesce {

/// sum_{k=2}^{K} 2/(k(k-1)) Y_k + 2/K with unit exponentials Y_k; the constant
/// is the mean of the dropped tail, so the mean is exactly 2 for every K.
double kingman_limit_sample(RandomStream& rng, std::size_t K);

/// `count` limit draws; draw i uses its own stream keyed by (seed, i), so the
/// same seed gives common random numbers across K.
std::vector<double> kingman_limit_draws(std::uint64_t seed, std::size_t count, std::size_t K,
                                        std::size_t threads = 0);

/// Growth rule for the collision probability c2(n) = lambda(n) / ln^2 n.
struct CollisionRule {
  enum class Kind { fixed, lambda };
  Kind kind = Kind::lambda;
  double fixed_c2 = 0.0;
  std::string lambda = "ln";  ///< ln | sqrt_ln | ln_ln

  double lambda_at(std::size_t n) const;
  double c2_at(std::size_t n) const;
};

/// One experiment document:
///   {"experiment": "limit" | "threshold" | "early",
///    "n": [..], "replicates": .., "seed": .., "K": .., "eps": ..,
///    "c2_rule": {"kind": "lambda", "lambda": "ln"} | {"kind": "fixed", "c2": ..},
///    "hat_exponent": 0.75, "output": "path"}
struct ExperimentConfig {
  std::string kind;
  std::vector<std::size_t> ns;
  std::size_t replicates = 1000;
  std::uint64_t seed = 1;
  std::size_t truncation = 200;
  double eps = 0.2;
  double hat_exponent = 0.75;
  CollisionRule rule;
  std::string output;
};

ExperimentConfig experiment_from_json(const nlohmann::json& doc);

struct LimitLawResult {
  std::size_t n;
  std::size_t replicates;
  double mean_T;
  double mean_ratio;  ///< mean(T) / (2n)
  double ks;          ///< KS distance of 2T / mean(T) to as many limit draws
};

/// Uniform p on n boxes. Simulation streams are keyed by `seed`; limit draws
/// by a seed derived from it, so two n values with the same seed share the
/// limit sample.
LimitLawResult limit_law_experiment(std::size_t n, std::size_t replicates, std::uint64_t seed,
                                    std::size_t K = 200, std::size_t threads = 0);

struct ThresholdRow {
  std::size_t n;
  double lambda;
  double c2;
  SummaryStats topheavy_T;
  double topheavy_scaled;  ///< E[T] c2
  double cutoff;           ///< c2^{-1} sqrt(lambda) / 20
  double fraction_above;   ///< share of replicates with T >= cutoff
  SummaryStats uniform_T;
  double uniform_scaled;   ///< E[T] / n for the uniform control
};

std::vector<ThresholdRow> threshold_experiment(const std::vector<std::size_t>& ns,
                                               const CollisionRule& rule, std::size_t replicates,
                                               std::uint64_t seed, std::size_t threads = 0);

struct EarlyPhaseResult {
  std::size_t n;
  double eps;
  double k_star;
  double k_one;
  double k_hat;
  double mean_tau_kstar;
  double bound;            ///< 5 c2^{-1/2} ln n
  double ratio_to_c2inv;   ///< E[tau(k*)] c2
  double middle_scaled;    ///< E[tau(k1) - tau(k*)] c2
  double mean_tau_khat;
  std::size_t delta_violations;
};

/// Uniform p with recorded trajectories; the envelope audit runs above k*.
EarlyPhaseResult early_phase_experiment(std::size_t n, double eps, std::size_t replicates,
                                        std::uint64_t seed, double hat_exponent = 0.75,
                                        std::size_t threads = 0);

void write_threshold_csv(std::ostream& out, const std::vector<ThresholdRow>& rows);
void write_limit_csv(std::ostream& out, const std::vector<LimitLawResult>& rows);
void write_early_csv(std::ostream& out, const std::vector<EarlyPhaseResult>& rows);

}  // namespace coalesce
