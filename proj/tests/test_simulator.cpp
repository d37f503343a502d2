#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "oddstop/simulator.hpp"
#include "support.hpp"

using namespace oddstop;
using namespace oddstop::sim;
using oddstop::testing::kExampleProbs;

namespace {

SimConfig config(std::uint64_t reps, std::uint64_t seed, unsigned threads = 1, bool keep = false) {
  SimConfig c;
  c.replications = reps;
  c.seed = seed;
  c.threads = threads;
  c.keep_replications = keep;
  return c;
}

bool same_records(const std::vector<ReplicationRecord>& a, const std::vector<ReplicationRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].length != b[i].length || a[i].successes != b[i].successes ||
        a[i].last_success != b[i].last_success || a[i].treated != b[i].treated ||
        a[i].win != b[i].win || a[i].futile != b[i].futile) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("pairwise_sum") {
  std::vector<double> values(1000);
  std::iota(values.begin(), values.end(), 1.0);
  CHECK(pairwise_sum(values) == 500500.0);
  CHECK(pairwise_sum(std::span<const double>()) == 0.0);
}

TEST_CASE("replication engines are independent of thread layout") {
  auto a = replication_engine(42, 7);
  auto b = replication_engine(42, 7);
  CHECK(a() == b());
  CHECK(replication_engine(42, 7)() != replication_engine(42, 8)());
  CHECK(replication_engine(42, 7)() != replication_engine(43, 7)());
}

TEST_CASE("known-odds simulation is deterministic for any thread count") {
  const auto profile = odds_of(kExampleProbs);
  const auto plan = stop_index(profile);
  const auto one = simulate_known(profile, plan, config(20000, 99, 1, true));
  const auto four = simulate_known(profile, plan, config(20000, 99, 4, true));
  CHECK(one.wins == four.wins);
  CHECK(one.mean_treated == four.mean_treated);
  CHECK(one.mean_futile == four.mean_futile);
  CHECK(one.further_success_freq == four.further_success_freq);
  CHECK(same_records(one.records, four.records));
  CHECK(to_json(one).dump() == to_json(four).dump());

  const auto other = simulate_known(profile, plan, config(20000, 100));
  CHECK(other.wins != one.wins);
}

TEST_CASE("known-odds simulation agrees with the exact value") {
  const auto profile = odds_of(kExampleProbs);
  const auto plan = stop_index(profile);
  const std::uint64_t reps = 200000;
  const auto report = simulate_known(profile, plan, config(reps, 5));
  const double sigma = std::sqrt(plan.V * (1 - plan.V) / double(reps));
  CHECK(std::abs(report.win_rate - plan.V) < 4 * sigma);
  CHECK(report.benchmark == plan.V);
  CHECK(report.ci_halfwidth == doctest::Approx(2.5758293035489004 *
                                               std::sqrt(report.win_rate * (1 - report.win_rate) /
                                                         double(reps))));

  REQUIRE(report.further_success_freq.size() == kExampleProbs.size() + 1);
  for (Index k = 0; k <= profile.size(); ++k) {
    const double exact = 1.0 - prob_no_further(profile, k);
    const double sd = std::sqrt(exact * (1 - exact) / double(reps));
    CHECK(std::abs(report.further_success_freq[std::size_t(k)] - exact) <= 4 * sd + 1e-15);
  }
}

TEST_CASE("prophet baselines dominate") {
  const auto profile = odds_of(kExampleProbs);
  const auto report = simulate_known(profile, stop_index(profile), config(20000, 3));
  CHECK(report.prophet.win_rate == 1.0);
  CHECK(report.half_prophet.win_rate == 1.0);
  CHECK(report.win_rate <= report.prophet.win_rate);
  CHECK(report.half_prophet.mean_treated >= report.prophet.mean_treated);
  // Expected number of successes.
  const double expected = std::accumulate(kExampleProbs.begin(), kExampleProbs.end(), 0.0);
  CHECK(std::abs(report.prophet.mean_treated - expected) < 0.05);
}

TEST_CASE("single patient") {
  const std::vector<double> p{0.3};
  const auto profile = odds_of(p);
  const auto report = simulate_known(profile, stop_index(profile), config(50000, 8, 1, true));
  CHECK(std::abs(report.win_rate - 0.3) < 4 * std::sqrt(0.21 / 50000));
  for (const auto& rec : report.records) {
    REQUIRE(rec.treated == 1);
    REQUIRE(rec.futile == (rec.win ? 0 : (rec.successes == 0 ? 1 : 0)));
  }
}

TEST_CASE("thinning reproduces Poisson counts") {
  Column<double> knots(4);
  knots << 0.0, 1.0, 3.0, 4.0;
  Column<double> rates(3);
  rates << 2.0, 10.0, 1.0;
  const Intensity<double> lambda(knots, rates);
  const int draws = 20000;
  double sum_a = 0, sum_b = 0, sum_ab = 0, sum_a2 = 0, sum_b2 = 0;
  for (int i = 0; i < draws; ++i) {
    auto engine = replication_engine(17, std::uint64_t(i));
    const auto times = sample_arrivals(lambda, engine);
    REQUIRE(std::is_sorted(times.begin(), times.end()));
    double a = 0, b = 0;
    for (double u : times) {
      REQUIRE(u >= 0.0);
      REQUIRE(u < 4.0);
      (u < 1.0 ? a : b) += 1;
    }
    sum_a += a;
    sum_b += b;
    sum_ab += a * b;
    sum_a2 += a * a;
    sum_b2 += b * b;
  }
  const double mean_a = sum_a / draws;  // Poisson(2)
  const double mean_b = sum_b / draws;  // Poisson(21)
  CHECK(std::abs(mean_a - 2.0) < 4 * std::sqrt(2.0 / draws));
  CHECK(std::abs(mean_b - 21.0) < 4 * std::sqrt(21.0 / draws));
  const double var_a = sum_a2 / draws - mean_a * mean_a;
  const double var_b = sum_b2 / draws - mean_b * mean_b;
  CHECK(var_a == doctest::Approx(2.0).epsilon(0.06));
  CHECK(var_b == doctest::Approx(21.0).epsilon(0.06));
  // Disjoint intervals: counts uncorrelated.
  const double corr = (sum_ab / draws - mean_a * mean_b) / std::sqrt(var_a * var_b);
  CHECK(std::abs(corr) < 4.0 / std::sqrt(double(draws)));
}

TEST_CASE("adaptive simulation") {
  const std::vector<double> h(20, 0.9);
  const auto scores = health_scores(h);
  const auto one = simulate_adaptive(0.1, scores, config(5000, 21, 1));
  const auto three = simulate_adaptive(0.1, scores, config(5000, 21, 3));
  CHECK(one.wins == three.wins);
  CHECK(one.mean_treated == three.mean_treated);
  CHECK(one.benchmark == stop_index(odds_of(std::vector<double>(20, 0.09))).V);
  CHECK(one.win_rate > 0.0);
  CHECK(one.win_rate < one.benchmark);
  CHECK_THROWS_AS(simulate_adaptive(1.0, scores, config(10, 1)), DomainError);
}

TEST_CASE("horizon simulation") {
  ArrivalModel<double> model(Intensity<double>::constant(5.0, 4.0));
  SUBCASE("deterministic across threads") {
    const auto one = simulate_horizon(model, 0.2, {0.6, 0.9}, config(4000, 2, 1, true));
    const auto two = simulate_horizon(model, 0.2, {0.6, 0.9}, config(4000, 2, 2, true));
    CHECK(one.wins == two.wins);
    CHECK(one.benchmark == two.benchmark);
    CHECK(same_records(one.records, two.records));
    CHECK(one.benchmark > 0.0);
    CHECK(one.win_rate > 0.0);
    CHECK(std::abs(double(one.records.size()) - 4000.0) < 1.0);
  }
  SUBCASE("zero rate gives empty streams") {
    ArrivalModel<double> silent(Intensity<double>::constant(0.0, 4.0));
    const auto report = simulate_horizon(silent, 0.2, {}, config(500, 2));
    CHECK(report.wins == 0);
    CHECK(report.no_success == 500);
    CHECK(report.benchmark == 0.0);
    CHECK(report.mean_treated == 0.0);
  }
  SUBCASE("bad parameters") {
    CHECK_THROWS_AS(simulate_horizon(model, 0.0, {}, config(1, 1)), DomainError);
    CHECK_THROWS_AS(simulate_horizon(model, 0.2, {0.9, 0.5}, config(1, 1)), DomainError);
    CHECK_THROWS_AS(simulate_horizon(model, 0.2, {}, config(0, 1)), DomainError);
  }
}

TEST_CASE("report serialization") {
  const auto profile = odds_of(kExampleProbs);
  const auto report = simulate_known(profile, stop_index(profile), config(100, 1, 1, true));
  const auto j = to_json(report);
  for (const char* key : {"scenario", "replications", "seed", "wins", "win_rate", "ci99_halfwidth",
                          "mean_futile", "mean_treated", "benchmark", "prophet", "half_prophet",
                          "further_success_freq"}) {
    CHECK(j.contains(key));
  }
  std::ostringstream csv;
  write_csv(csv, report);
  const std::string text = csv.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 101);
  CHECK(text.rfind("replication,", 0) == 0);
}
