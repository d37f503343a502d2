#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oddstop/adaptive.hpp"
#include "oddstop/horizon.hpp"
#include "oddstop/odds_core.hpp"

namespace oddstop::sim {

struct SimConfig {
  std::uint64_t replications = 100000;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: hardware concurrency
  bool keep_replications = false;
};

// One simulated sequence. Indices are 1-based; 0 means "none".
struct ReplicationRecord {
  std::uint64_t replication = 0;
  int length = 0;        // patients in the sequence (arrivals for the horizon scenario)
  int successes = 0;     // successes in the full sequence
  int last_success = 0;  // index of the last success
  int treated = 0;       // index at which the strategy stopped
  bool win = false;      // stopped exactly on the last success
  int futile = 0;        // treatments administered after the last success
};

struct Baseline {
  double win_rate = 1.0;
  double mean_treated = 0.0;
};

struct SimReport {
  std::string scenario;
  std::uint64_t replications = 0;
  std::uint64_t seed = 0;
  std::uint64_t wins = 0;
  double win_rate = 0;
  double ci_halfwidth = 0;  // 99% normal-approximation binomial interval
  double mean_futile = 0;
  double mean_treated = 0;
  double mean_missed = 0;        // successes left untreated after the stop
  std::uint64_t no_success = 0;  // replications with no success at all
  double benchmark = 0;          // known-odds V for the scenario (see simulate_*)
  Baseline prophet;
  Baseline half_prophet;
  // Fraction of replications with a success after step k, k = 0..n (known scenario).
  std::vector<double> further_success_freq;
  std::vector<ReplicationRecord> records;
};

/// Independent engine for one replication; identical for any thread layout.
std::mt19937_64 replication_engine(std::uint64_t seed, std::uint64_t replication);

/// Order-fixed pairwise summation.
double pairwise_sum(std::span<const double> values);

/// Inhomogeneous Poisson arrival times on [0, t] by thinning.
std::vector<double> sample_arrivals(const Intensity<double>& intensity, std::mt19937_64& engine);

/// Known odds: stop at the first success at index >= plan.s. benchmark = plan.V.
SimReport simulate_known(const OddsProfile<double>& profile, const StopPlan<double>& plan,
                         const SimConfig& config);

/// Outcomes drawn with P(+ at k) = h_k true_p; the estimated-odds rule runs
/// online (consent assumed granted). benchmark = odds-rule V on the true p_k.
SimReport simulate_adaptive(double true_p, const HealthScores<double>& scores,
                            const SimConfig& config);

struct HealthRange {
  double lo = 0.8;
  double hi = 0.8;
};

/// Poisson request stream; the stream closes on the first success arriving
/// while the refusal integral is <= 1. benchmark = mean over replications of
/// the known-p odds-rule V on the realized arrivals (0 for empty streams).
SimReport simulate_horizon(const ArrivalModel<double>& model, double true_p, HealthRange health,
                           const SimConfig& config);

nlohmann::json to_json(const SimReport& report);
void write_csv(std::ostream& out, const SimReport& report);

}  // namespace oddstop::sim
