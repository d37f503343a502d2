#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "oddstop/adaptive.hpp"

using namespace oddstop;

namespace {

AdaptiveState<double> state_of(const std::vector<double>& h, const std::vector<Outcome>& seen) {
  AdaptiveState<double> state(health_scores(h));
  for (auto o : seen) state.record(o);
  return state;
}

constexpr auto P = Outcome::Success;
constexpr auto F = Outcome::Failure;

}  // namespace

TEST_CASE("health scores validate and accumulate") {
  const auto scores = health_scores(std::vector<double>{0.5, 0.25, 0.75});
  CHECK(scores.prefix()[2] == 1.5);
  CHECK_THROWS_AS(health_scores(std::vector<double>{0.5, 1.0}), DomainError);
  CHECK_THROWS_AS(health_scores(std::vector<double>{}), DomainError);
}

TEST_CASE("estimate_p") {
  CHECK(estimate_p(state_of({0.5, 0.5}, {P, F})) == 1.0);
  CHECK(estimate_p(state_of({0.5, 0.5, 0.5}, {F, F})) == 0.0);
  CHECK(estimate_p(state_of({0.5, 0.5}, {P, P})) == 2.0);
  CHECK_THROWS_AS(estimate_p(state_of({0.5}, {})), NoDataError);
}

TEST_CASE("estimate_p is exactly unbiased for every k") {
  // E[S_k / H_k] by enumerating all 2^k outcome strings with P(+) = h_j p.
  const std::vector<double> h{0.9, 0.3, 0.6, 0.8, 0.45, 0.7};
  const double p = 0.4;
  for (std::size_t k = 1; k <= h.size(); ++k) {
    double mean = 0.0;
    for (unsigned mask = 0; mask < (1u << k); ++mask) {
      std::vector<Outcome> seen;
      double weight = 1.0;
      for (std::size_t j = 0; j < k; ++j) {
        const bool success = (mask >> j) & 1u;
        seen.push_back(success ? P : F);
        weight *= success ? h[j] * p : 1.0 - h[j] * p;
      }
      mean += weight * estimate_p(state_of(h, seen));
    }
    CHECK(mean == doctest::Approx(p).epsilon(1e-13));
  }
}

TEST_CASE("estimated future odds") {
  SUBCASE("equal health, one success in four") {
    const auto state = state_of(std::vector<double>(6, 0.5), {F, F, F, P});
    const auto terms = estimated_future_odds(state);
    REQUIRE(terms.size() == 2);
    CHECK(terms[0] == doctest::Approx(1.0 / 3.0));
    CHECK(terms[1] == doctest::Approx(1.0 / 3.0));
    CHECK(future_odds_sum(state) == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("no successes gives zero terms") {
    const auto state = state_of({0.5, 0.5, 0.5}, {F});
    CHECK(future_odds_sum(state) == 0.0);
  }
  SUBCASE("non-positive truncated denominator gives +inf") {
    const auto state = state_of({0.5, 0.9, 0.5}, {P});
    const auto terms = estimated_future_odds(state);
    CHECK(std::isinf(terms[0]));
    CHECK(std::isinf(terms[1]));
    CHECK(std::isinf(future_odds_sum(state)));
  }
  SUBCASE("after the last patient the sum is empty") {
    CHECK(future_odds_sum(state_of({0.5, 0.5}, {P, F})) == 0.0);
  }
}

TEST_CASE("should_stop") {
  const std::vector<double> six(6, 0.5);
  SUBCASE("success with estimated odds below one stops") {
    const auto verdict = should_stop(state_of(six, {F, F, F, P}));
    CHECK(verdict.action == Action::Stop);
    CHECK(verdict.future_odds_sum == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("same figures after a failure keep going") {
    const auto verdict = should_stop(state_of(six, {P, F, F, F}));
    CHECK(verdict.action == Action::Continue);
    CHECK(verdict.future_odds_sum == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("no success yet needs consent") {
    CHECK(should_stop(state_of(six, {F, F})).action == Action::ConsentRequired);
  }
  SUBCASE("unbounded odds keep going") {
    const auto verdict = should_stop(state_of({0.5, 0.9, 0.5}, {P}));
    CHECK(verdict.action == Action::Continue);
    CHECK(std::isinf(verdict.future_odds_sum));
  }
  SUBCASE("large future odds keep going") {
    CHECK(should_stop(state_of(six, {P})).action == Action::Continue);
  }
  SUBCASE("last patient with a success on record stops") {
    CHECK(should_stop(state_of({0.5, 0.5}, {P, F})).action == Action::Stop);
    CHECK(should_stop(state_of({0.5, 0.5}, {F, F})).action == Action::ConsentRequired);
  }
  SUBCASE("recording past n throws") {
    auto state = state_of({0.5}, {P});
    CHECK_THROWS_AS(state.record(F), DomainError);
  }
}

TEST_CASE("inference_report") {
  SUBCASE("two future patients at h = 0.5 with p_hat = 1") {
    const auto report = inference_report(state_of({0.5, 0.5, 0.5, 0.5}, {P, F}));
    CHECK(report.p_hat == 1.0);
    CHECK(report.expected_further == doctest::Approx(1.0));
    CHECK(report.prob_no_further == doctest::Approx(0.25));
    CHECK_FALSE(report.clamped);
  }
  SUBCASE("estimates above one are clamped") {
    const auto report = inference_report(state_of({0.5, 0.5, 0.9}, {P, P}));
    CHECK(report.p_hat == 2.0);
    CHECK(report.clamped);
    CHECK(report.future_probs[0] == 1.0);
    CHECK(report.prob_no_further == 0.0);
  }
  SUBCASE("threshold") {
    const auto report = inference_report(state_of({0.5, 0.5, 0.5, 0.5}, {P, F}));
    SequencePolicy<double> policy;
    policy.alpha = 0.3;
    CHECK_FALSE(threshold_stop(report, policy));
    policy.alpha = 0.8;
    CHECK(threshold_stop(report, policy));
    policy.alpha = 0.75;
    CHECK_FALSE(threshold_stop(report, policy));
  }
  SUBCASE("policy validation") {
    SequencePolicy<double> policy;
    policy.alpha = 1.0;
    CHECK_THROWS_AS(policy.validate(), DomainError);
    policy.alpha = 0.1;
    policy.max_initial_failures = 0;
    CHECK_THROWS_AS(policy.validate(), DomainError);
    policy.max_initial_failures = 3;
    CHECK_NOTHROW(policy.validate());
  }
}

TEST_CASE("spread_scores") {
  const std::vector<int> ranks{1, 2, 3, 4, 5};
  const auto scores = spread_scores(0.4, 0.9, std::span<const int>(ranks));
  const double expected[] = {0.4, 0.525, 0.65, 0.775, 0.9};
  for (int i = 0; i < 5; ++i) CHECK(scores.h()[i] == doctest::Approx(expected[i]).epsilon(1e-14));

  const std::vector<int> shuffled{5, 1, 3};
  const auto s2 = spread_scores(0.4, 0.8, std::span<const int>(shuffled));
  CHECK(s2.h()[0] == doctest::Approx(0.8));
  CHECK(s2.h()[1] == doctest::Approx(0.4));
  CHECK(s2.h()[2] == doctest::Approx(0.6));

  const std::vector<int> ties{1, 1, 2};
  const auto s3 = spread_scores(0.4, 0.8, std::span<const int>(ties));
  CHECK(s3.h()[0] == doctest::Approx(0.5));
  CHECK(s3.h()[1] == doctest::Approx(0.5));
  CHECK(s3.h()[2] == doctest::Approx(0.8));

  const std::vector<int> one{7};
  CHECK(spread_scores(0.4, 0.8, std::span<const int>(one)).h()[0] == doctest::Approx(0.6));

  CHECK_THROWS_AS(spread_scores(0.9, 0.4, std::span<const int>(ranks)), DomainError);
  CHECK_THROWS_AS(spread_scores(0.0, 0.4, std::span<const int>(ranks)), DomainError);
}

TEST_CASE("with() leaves the original state untouched") {
  const auto base = state_of({0.5, 0.5, 0.5}, {F});
  const auto next = base.with(P);
  CHECK(base.k() == 1);
  CHECK(next.k() == 2);
  CHECK(next.successes() == 1);
  CHECK(next.health_sum() == 1.0);
}
