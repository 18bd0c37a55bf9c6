#include "coalesce/asymptotics.hpp"

#include <algorithm>
#include <cmath>

#include "coalesce/csv.hpp"
#include "coalesce/distributions.hpp"
#include "coalesce/dynamics.hpp"
#include "coalesce/errors.hpp"
#include "coalesce/parallel.hpp"
#include "coalesce/simulate.hpp"

namespace coalesce {

namespace {

// Independent master seeds for the sub-experiments of one run.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t n = 0) {
  return mix64(mix64(seed ^ (tag * 0xD1B54A32D192ED03ULL)) + n);
}

constexpr std::uint64_t kLimitTag = 1;
constexpr std::uint64_t kTopheavyTag = 2;
constexpr std::uint64_t kUniformTag = 3;

}  // namespace

double kingman_limit_sample(RandomStream& rng, std::size_t K) {
  if (K < 2) throw ValidationError("truncation K must be at least 2");
  double sum = 0.0;
  for (std::size_t k = 2; k <= K; ++k) {
    const double kd = static_cast<double>(k);
    sum += 2.0 / (kd * (kd - 1.0)) * rng.exponential();
  }
  return sum + 2.0 / static_cast<double>(K);
}

std::vector<double> kingman_limit_draws(std::uint64_t seed, std::size_t count, std::size_t K,
                                        std::size_t threads) {
  if (K < 2) throw ValidationError("truncation K must be at least 2");
  std::vector<double> out(count);
  parallel_for(count, std::max<std::size_t>(1, std::min(resolve_threads(threads), count)),
               [&](std::size_t, std::size_t i) {
                 RandomStream rng(seed, i);
                 out[i] = kingman_limit_sample(rng, K);
               });
  return out;
}

double CollisionRule::lambda_at(std::size_t n) const {
  const double ln = std::log(static_cast<double>(n));
  if (kind == Kind::fixed) return fixed_c2 * ln * ln;
  if (lambda == "ln") return ln;
  if (lambda == "sqrt_ln") return std::sqrt(ln);
  if (lambda == "ln_ln") return std::log(ln);
  throw ValidationError("unknown lambda rule '" + lambda + "'");
}

double CollisionRule::c2_at(std::size_t n) const {
  if (n < 3) throw ValidationError("c2 rule needs n >= 3");
  const double dn = static_cast<double>(n);
  const double ln = std::log(dn);
  const double c2 = kind == Kind::fixed ? fixed_c2 : lambda_at(n) / (ln * ln);
  if (!(c2 >= 1.0 / dn && c2 <= 1.0)) {
    throw ValidationError("c2 rule gives c2 = " + format_double(c2) + " outside [1/n, 1] at n = " +
                          std::to_string(n));
  }
  return c2;
}

ExperimentConfig experiment_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("experiment config must be a JSON object");
  ExperimentConfig c;
  try {
    c.kind = doc.value("experiment", std::string("limit"));
    if (doc.contains("n")) {
      const auto& n = doc.at("n");
      if (n.is_array()) {
        for (const auto& v : n) c.ns.push_back(v.get<std::size_t>());
      } else {
        c.ns.push_back(n.get<std::size_t>());
      }
    }
    c.replicates = doc.value("replicates", c.replicates);
    c.seed = doc.value("seed", c.seed);
    c.truncation = doc.value("K", c.truncation);
    c.eps = doc.value("eps", c.eps);
    c.hat_exponent = doc.value("hat_exponent", c.hat_exponent);
    c.output = doc.value("output", std::string());
    if (doc.contains("c2_rule")) {
      const auto& r = doc.at("c2_rule");
      const auto kind = r.value("kind", std::string("lambda"));
      if (kind == "fixed") {
        c.rule.kind = CollisionRule::Kind::fixed;
        c.rule.fixed_c2 = r.at("c2").get<double>();
      } else if (kind == "lambda") {
        c.rule.kind = CollisionRule::Kind::lambda;
        c.rule.lambda = r.value("lambda", std::string("ln"));
      } else {
        throw ValidationError("c2_rule.kind must be 'fixed' or 'lambda'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed experiment config: ") + e.what());
  }
  if (c.kind != "limit" && c.kind != "threshold" && c.kind != "early") {
    throw ValidationError("experiment must be one of limit, threshold, early");
  }
  if (c.truncation < 2) throw ValidationError("K must be at least 2");
  if (c.replicates < 1) throw ValidationError("replicates must be at least 1");
  for (auto n : c.ns) {
    if (n < 2) throw ValidationError("every n must be at least 2");
  }
  return c;
}

LimitLawResult limit_law_experiment(std::size_t n, std::size_t replicates, std::uint64_t seed,
                                    std::size_t K, std::size_t threads) {
  if (replicates < 2) throw ValidationError("limit experiment needs at least 2 replicates");
  SimConfig cfg{ProbabilityVector::uniform(n), 0, replicates, seed, false, {}};
  const BatchResult batch = Simulator(cfg).batch(threads);
  const double mean = batch.coalescence.mean();

  // The limit sum has mean 2, so T is scaled to mean 2 as well.
  std::vector<double> scaled;
  scaled.reserve(replicates);
  for (const auto& r : batch.runs) scaled.push_back(2.0 * static_cast<double>(r.coalescence_time) / mean);
  const auto limit = kingman_limit_draws(derive_seed(seed, kLimitTag), replicates, K, threads);

  LimitLawResult out{};
  out.n = n;
  out.replicates = replicates;
  out.mean_T = mean;
  out.mean_ratio = mean / (2.0 * static_cast<double>(n));
  out.ks = ks_distance(std::move(scaled), limit);
  return out;
}

std::vector<ThresholdRow> threshold_experiment(const std::vector<std::size_t>& ns,
                                               const CollisionRule& rule, std::size_t replicates,
                                               std::uint64_t seed, std::size_t threads) {
  std::vector<ThresholdRow> rows;
  for (std::size_t n : ns) {
    ThresholdRow row{};
    row.n = n;
    row.c2 = rule.c2_at(n);
    row.lambda = rule.lambda_at(n);
    row.cutoff = std::sqrt(row.lambda) / (20.0 * row.c2);

    SimConfig heavy{topheavy(n, row.c2), 0, replicates, derive_seed(seed, kTopheavyTag, n), false,
                    {}};
    const BatchResult hb = Simulator(heavy).batch(threads);
    row.topheavy_T = hb.coalescence;
    row.topheavy_scaled = hb.coalescence.mean() * row.c2;
    std::size_t above = 0;
    for (const auto& r : hb.runs) {
      if (static_cast<double>(r.coalescence_time) >= row.cutoff) ++above;
    }
    row.fraction_above = static_cast<double>(above) / static_cast<double>(replicates);

    SimConfig flat{ProbabilityVector::uniform(n), 0, replicates, derive_seed(seed, kUniformTag, n),
                   false, {}};
    const BatchResult ub = Simulator(flat).batch(threads);
    row.uniform_T = ub.coalescence;
    row.uniform_scaled = ub.coalescence.mean() / static_cast<double>(n);
    rows.push_back(row);
  }
  return rows;
}

EarlyPhaseResult early_phase_experiment(std::size_t n, double eps, std::size_t replicates,
                                        std::uint64_t seed, double hat_exponent,
                                        std::size_t threads) {
  const ProbabilityVector p = ProbabilityVector::uniform(n);
  const double c2 = 1.0 / static_cast<double>(n);
  EarlyPhaseResult out{};
  out.n = n;
  out.eps = eps;
  out.k_star = early_threshold(c2, n, eps);
  out.k_one = late_threshold(c2, n, eps);
  out.k_hat = std::pow(static_cast<double>(n), hat_exponent);
  out.bound = 5.0 / std::sqrt(c2) * std::log(static_cast<double>(n));

  // Thresholds below one ball are never crossed; clamp so passages are defined.
  SimConfig cfg{p, 0, replicates, seed, true,
                {std::max(1.0, out.k_star), std::max(1.0, out.k_one), std::max(1.0, out.k_hat)}};
  const BatchResult batch = Simulator(cfg).batch(threads);

  SummaryStats middle;
  for (const auto& r : batch.runs) {
    middle.add(static_cast<double>(r.passages[1]) - static_cast<double>(r.passages[0]));
    out.delta_violations += delta_audit(r, p, out.k_star);
  }
  out.mean_tau_kstar = batch.passages[0].mean();
  out.mean_tau_khat = batch.passages[2].mean();
  out.ratio_to_c2inv = out.mean_tau_kstar * c2;
  out.middle_scaled = middle.mean() * c2;
  return out;
}

void write_threshold_csv(std::ostream& out, const std::vector<ThresholdRow>& rows) {
  CsvWriter csv(out, {"n", "lambda", "c2", "replicates", "topheavy_mean_T", "topheavy_stderr",
                      "topheavy_ET_c2", "cutoff", "fraction_above", "uniform_mean_T",
                      "uniform_ET_over_n"});
  for (const auto& r : rows) {
    csv.cell(r.n).cell(r.lambda).cell(r.c2).cell(r.topheavy_T.count());
    csv.cell(r.topheavy_T.mean()).cell(r.topheavy_T.stderr_of_mean().value_or(0.0));
    csv.cell(r.topheavy_scaled).cell(r.cutoff).cell(r.fraction_above);
    csv.cell(r.uniform_T.mean()).cell(r.uniform_scaled);
    csv.end_row();
  }
}

void write_limit_csv(std::ostream& out, const std::vector<LimitLawResult>& rows) {
  CsvWriter csv(out, {"n", "replicates", "mean_T", "mean_ratio", "ks"});
  for (const auto& r : rows) {
    csv.cell(r.n).cell(r.replicates).cell(r.mean_T).cell(r.mean_ratio).cell(r.ks);
    csv.end_row();
  }
}

void write_early_csv(std::ostream& out, const std::vector<EarlyPhaseResult>& rows) {
  CsvWriter csv(out, {"n", "eps", "k_star", "k_one", "k_hat", "mean_tau_kstar", "bound",
                      "tau_kstar_c2", "middle_c2", "mean_tau_khat", "delta_violations"});
  for (const auto& r : rows) {
    csv.cell(r.n).cell(r.eps).cell(r.k_star).cell(r.k_one).cell(r.k_hat);
    csv.cell(r.mean_tau_kstar).cell(r.bound).cell(r.ratio_to_c2inv).cell(r.middle_scaled);
    csv.cell(r.mean_tau_khat).cell(r.delta_violations);
    csv.end_row();
  }
}

}  // namespace coalesce
