#include "oddstop/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <thread>

namespace oddstop::sim {

namespace {

constexpr double kZ99 = 2.5758293035489004;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Integer tallies merge exactly, so any split of replications over threads
// gives the same report.
struct Tally {
  std::uint64_t wins = 0;
  std::uint64_t futile = 0;
  std::uint64_t treated = 0;
  std::uint64_t missed = 0;
  std::uint64_t no_success = 0;
  std::uint64_t prophet_treated = 0;
  std::uint64_t half_prophet_treated = 0;
  std::vector<std::uint64_t> further;  // per step k: replications with a success after k

  void merge(const Tally& other) {
    wins += other.wins;
    futile += other.futile;
    treated += other.treated;
    missed += other.missed;
    no_success += other.no_success;
    prophet_treated += other.prophet_treated;
    half_prophet_treated += other.half_prophet_treated;
    if (further.size() < other.further.size()) further.resize(other.further.size(), 0);
    for (std::size_t k = 0; k < other.further.size(); ++k) further[k] += other.further[k];
  }
};

// Scores a finished sequence given where the strategy stopped (1-based, 0 = nothing treated).
ReplicationRecord score(std::uint64_t replication, const std::vector<Outcome>& outcomes,
                        int treated) {
  ReplicationRecord rec;
  rec.replication = replication;
  rec.length = static_cast<int>(outcomes.size());
  rec.treated = treated;
  for (int i = 0; i < rec.length; ++i) {
    if (is_success(outcomes[i])) {
      ++rec.successes;
      rec.last_success = i + 1;
    }
  }
  rec.win = treated >= 1 && rec.last_success == treated;
  rec.futile = rec.last_success <= treated ? treated - rec.last_success : 0;
  return rec;
}

void add(Tally& tally, const ReplicationRecord& rec) {
  tally.wins += rec.win ? 1 : 0;
  tally.futile += static_cast<std::uint64_t>(rec.futile);
  tally.treated += static_cast<std::uint64_t>(rec.treated);
  if (rec.successes == 0) ++tally.no_success;
  tally.prophet_treated += static_cast<std::uint64_t>(rec.successes);
  tally.half_prophet_treated += static_cast<std::uint64_t>(rec.last_success);
}

unsigned worker_count(const SimConfig& config) {
  unsigned threads = config.threads;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(
      std::min<std::uint64_t>(threads, std::max<std::uint64_t>(1, config.replications)));
}

// Runs body(replication, tally, records) over contiguous replication blocks.
template <typename Body>
Tally run_blocks(const SimConfig& config, std::vector<ReplicationRecord>& records, Body body) {
  if (config.replications == 0) throw DomainError("replications must be at least 1");
  const unsigned workers = worker_count(config);
  if (config.keep_replications) records.resize(config.replications);
  std::vector<Tally> tallies(workers);
  auto work = [&](unsigned w) {
    const std::uint64_t begin = config.replications * w / workers;
    const std::uint64_t end = config.replications * (w + 1) / workers;
    for (std::uint64_t rep = begin; rep < end; ++rep) {
      ReplicationRecord rec = body(rep, tallies[w]);
      add(tallies[w], rec);
      if (config.keep_replications) records[rep] = rec;
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  Tally total;
  for (const auto& t : tallies) total.merge(t);
  return total;
}

SimReport finish(std::string scenario, const SimConfig& config, const Tally& tally,
                 std::vector<ReplicationRecord> records) {
  SimReport report;
  report.scenario = std::move(scenario);
  report.replications = config.replications;
  report.seed = config.seed;
  const double reps = static_cast<double>(config.replications);
  report.wins = tally.wins;
  report.win_rate = static_cast<double>(tally.wins) / reps;
  report.ci_halfwidth = kZ99 * std::sqrt(report.win_rate * (1.0 - report.win_rate) / reps);
  report.mean_futile = static_cast<double>(tally.futile) / reps;
  report.mean_treated = static_cast<double>(tally.treated) / reps;
  report.mean_missed = static_cast<double>(tally.missed) / reps;
  report.no_success = tally.no_success;
  report.prophet = {1.0, static_cast<double>(tally.prophet_treated) / reps};
  report.half_prophet = {1.0, static_cast<double>(tally.half_prophet_treated) / reps};
  for (auto count : tally.further) {
    report.further_success_freq.push_back(static_cast<double>(count) / reps);
  }
  report.records = std::move(records);
  return report;
}

std::uint64_t missed_after(const std::vector<Outcome>& outcomes, int treated) {
  return static_cast<std::uint64_t>(
      std::count(outcomes.begin() + treated, outcomes.end(), Outcome::Success));
}

}  // namespace

std::mt19937_64 replication_engine(std::uint64_t seed, std::uint64_t replication) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ replication));
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double total = 0;
    for (double v : values) total += v;
    return total;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

std::vector<double> sample_arrivals(const Intensity<double>& intensity, std::mt19937_64& engine) {
  std::vector<double> times;
  const double rate = intensity.max_rate();
  if (rate <= 0.0) return times;
  std::exponential_distribution<double> gap(rate);
  std::uniform_real_distribution<double> accept(0.0, 1.0);
  const double horizon = intensity.horizon();
  for (double u = gap(engine); u < horizon; u += gap(engine)) {
    if (accept(engine) * rate < intensity.rate_at(u)) times.push_back(u);
  }
  return times;
}

SimReport simulate_known(const OddsProfile<double>& profile, const StopPlan<double>& plan,
                         const SimConfig& config) {
  const int n = static_cast<int>(profile.size());
  const auto& p = profile.probs();
  std::vector<ReplicationRecord> records;
  auto tally = run_blocks(config, records, [&](std::uint64_t rep, Tally& t) {
    auto engine = replication_engine(config.seed, rep);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Outcome> outcomes(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      outcomes[k] = unit(engine) < p[k] ? Outcome::Success : Outcome::Failure;
    }
    int treated = n;
    for (int k = static_cast<int>(plan.s); k <= n; ++k) {
      if (is_success(outcomes[k - 1])) {
        treated = k;
        break;
      }
    }
    auto rec = score(rep, outcomes, treated);
    t.missed += missed_after(outcomes, treated);
    if (t.further.empty()) t.further.assign(static_cast<std::size_t>(n) + 1, 0);
    for (int k = 0; k < rec.last_success; ++k) ++t.further[k];
    return rec;
  });
  auto report = finish("known-odds", config, tally, std::move(records));
  report.benchmark = plan.V;
  return report;
}

SimReport simulate_adaptive(double true_p, const HealthScores<double>& scores,
                            const SimConfig& config) {
  if (!(true_p > 0.0 && true_p < 1.0)) throw DomainError("true p must lie strictly inside (0,1)");
  const int n = static_cast<int>(scores.size());
  const Column<double> true_probs = scores.h() * true_p;
  std::vector<ReplicationRecord> records;
  auto tally = run_blocks(config, records, [&](std::uint64_t rep, Tally& t) {
    auto engine = replication_engine(config.seed, rep);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Outcome> outcomes(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      outcomes[k] = unit(engine) < true_probs[k] ? Outcome::Success : Outcome::Failure;
    }
    AdaptiveState<double> state(scores);
    int treated = n;
    for (int k = 1; k <= n; ++k) {
      state.record(outcomes[k - 1]);
      // The rule can only return Stop after a success or at k = n.
      if (!is_success(outcomes[k - 1]) && k < n) continue;
      if (should_stop(state).action == Action::Stop) {
        treated = k;
        break;
      }
    }
    t.missed += missed_after(outcomes, treated);
    return score(rep, outcomes, treated);
  });
  auto report = finish("adaptive", config, tally, std::move(records));
  report.benchmark = stop_index(odds_of(true_probs)).V;
  return report;
}

SimReport simulate_horizon(const ArrivalModel<double>& model, double true_p, HealthRange health,
                           const SimConfig& config) {
  if (!(true_p > 0.0 && true_p < 1.0)) throw DomainError("true p must lie strictly inside (0,1)");
  if (!(health.lo > 0.0 && health.lo <= health.hi && health.hi < 1.0)) {
    throw DomainError("health range must satisfy 0 < lo <= hi < 1");
  }
  std::vector<double> oracle(config.replications, 0.0);
  std::vector<ReplicationRecord> records;
  auto tally = run_blocks(config, records, [&](std::uint64_t rep, Tally& t) {
    auto engine = replication_engine(config.seed, rep);
    const auto times = sample_arrivals(model.intensity(), engine);
    std::uniform_real_distribution<double> draw_h(health.lo, health.hi);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto m = static_cast<Index>(times.size());
    Column<double> h(m);
    std::vector<Outcome> outcomes(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) {
      h[i] = health.lo == health.hi ? health.lo : draw_h(engine);
      outcomes[i] = unit(engine) < h[i] * true_p ? Outcome::Success : Outcome::Failure;
    }
    ArrivalModel<double> online = model;
    int treated = static_cast<int>(m);
    for (Index i = 0; i < m; ++i) {
      online.record({times[i], h[i], outcomes[i]});
      if (is_success(outcomes[i]) && refusal_integral(online, times[i]).refuse_from_now) {
        treated = static_cast<int>(i) + 1;
        break;
      }
    }
    if (m > 0) oracle[rep] = stop_index(odds_of(Column<double>(h * true_p))).V;
    t.missed += missed_after(outcomes, treated);
    return score(rep, outcomes, treated);
  });
  auto report = finish("horizon", config, tally, std::move(records));
  report.benchmark = pairwise_sum(oracle) / static_cast<double>(config.replications);
  return report;
}

nlohmann::json to_json(const SimReport& report) {
  nlohmann::json j = {
      {"scenario", report.scenario},
      {"replications", report.replications},
      {"seed", report.seed},
      {"wins", report.wins},
      {"win_rate", report.win_rate},
      {"ci99_halfwidth", report.ci_halfwidth},
      {"mean_futile", report.mean_futile},
      {"mean_treated", report.mean_treated},
      {"mean_missed", report.mean_missed},
      {"no_success", report.no_success},
      {"benchmark", report.benchmark},
      {"prophet", {{"win_rate", report.prophet.win_rate},
                   {"mean_treated", report.prophet.mean_treated}}},
      {"half_prophet", {{"win_rate", report.half_prophet.win_rate},
                        {"mean_treated", report.half_prophet.mean_treated}}},
  };
  if (!report.further_success_freq.empty()) {
    j["further_success_freq"] = report.further_success_freq;
  }
  return j;
}

void write_csv(std::ostream& out, const SimReport& report) {
  out << "replication,length,successes,last_success,treated,win,futile\n";
  for (const auto& r : report.records) {
    out << r.replication << ',' << r.length << ',' << r.successes << ',' << r.last_success << ','
        << r.treated << ',' << (r.win ? 1 : 0) << ',' << r.futile << '\n';
  }
}

}  // namespace oddstop::sim
