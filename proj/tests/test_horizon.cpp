#include <doctest.h>

#include <cmath>
#include <vector>

#include "oddstop/horizon.hpp"

using namespace oddstop;

namespace {

Intensity<double> piecewise() {
  Column<double> knots(4);
  knots << 0.0, 1.0, 3.0, 4.0;
  Column<double> rates(3);
  rates << 2.0, 10.0, 1.0;
  return Intensity<double>(knots, rates);
}

// Midpoint-rule oracle for the intensity integral.
double quadrature(const Intensity<double>& lambda, double a, double b, int cells = 200000) {
  const double dx = (b - a) / cells;
  double total = 0.0;
  for (int i = 0; i < cells; ++i) total += lambda.rate_at(a + (i + 0.5) * dx) * dx;
  return total;
}

}  // namespace

TEST_CASE("intensity") {
  const auto lambda = piecewise();
  CHECK(lambda.horizon() == 4.0);
  CHECK(lambda.max_rate() == 10.0);
  CHECK(lambda.rate_at(0.5) == 2.0);
  CHECK(lambda.rate_at(1.0) == 10.0);
  CHECK(lambda.rate_at(4.0) == 1.0);
  CHECK(lambda.integral(0.0, 4.0) == doctest::Approx(23.0));
  CHECK(lambda.integral(0.5, 3.5) == doctest::Approx(1.0 + 20.0 + 0.5));
  for (double a : {0.0, 0.3, 1.7, 3.2}) {
    CHECK(lambda.integral(a, 4.0) == doctest::Approx(quadrature(lambda, a, 4.0)).epsilon(1e-4));
  }
  CHECK(Intensity<double>::from_expected_count(20.0, 4.0).rates()[0] == 5.0);

  Column<double> bad_knots(3);
  bad_knots << 0.0, 2.0, 1.0;
  Column<double> two(2);
  two << 1.0, 1.0;
  CHECK_THROWS_AS(Intensity<double>(bad_knots, two), DomainError);
  Column<double> shifted(3);
  shifted << 0.5, 1.0, 2.0;
  CHECK_THROWS_AS(Intensity<double>(shifted, two), DomainError);
  Column<double> negative(2);
  negative << 1.0, -1.0;
  Column<double> knots(3);
  knots << 0.0, 1.0, 2.0;
  CHECK_THROWS_AS(Intensity<double>(knots, negative), DomainError);
}

TEST_CASE("update_on_arrival") {
  ArrivalModel<double> model(Intensity<double>::constant(5.0, 10.0));
  CHECK(model.predictor() == 0.0);
  CHECK(model.mean_health() == 0.5);
  CHECK(model.mean_is_prior());

  model = update_on_arrival(model, 1.0, 0.8, Outcome::Success);
  CHECK(model.predictor() == doctest::Approx(1.25));
  CHECK(model.mean_health() == doctest::Approx(0.8));

  model = update_on_arrival(model, 2.0, 0.2, Outcome::Failure);
  CHECK(model.predictor() == doctest::Approx(1.0));
  CHECK(model.mean_health() == doctest::Approx(0.5));
  CHECK(model.count() == 2);
  CHECK(model.successes() == 1);
  CHECK(model.now() == 2.0);
}

TEST_CASE("arrival validation") {
  ArrivalModel<double> model(Intensity<double>::constant(5.0, 10.0));
  model.record({3.0, 0.5, Outcome::Failure});
  CHECK_THROWS_AS(model.record({2.0, 0.5, Outcome::Failure}), DomainError);
  CHECK_THROWS_AS(model.record({11.0, 0.5, Outcome::Failure}), DomainError);
  CHECK_THROWS_AS(model.record({4.0, 1.0, Outcome::Failure}), DomainError);
  CHECK_NOTHROW(model.record({3.0, 0.5, Outcome::Success}));
  CHECK_THROWS_AS(refusal_integral(model, -1.0), DomainError);
  CHECK_THROWS_AS(refusal_integral(model, 10.5), DomainError);
  CHECK_THROWS_AS(ArrivalModel<double>(Intensity<double>::constant(1.0, 1.0), 1.5), DomainError);
}

TEST_CASE("refusal time under a constant intensity") {
  // lambda P m_h (t - s) = 1  =>  s* = t - 1 / (lambda P m_h)
  const double lambda = 10.0;
  const double t = 5.0;
  ArrivalModel<double> model(Intensity<double>::constant(lambda, t));
  model.record({0.5, 0.8, Outcome::Success});
  model.record({1.0, 0.8, Outcome::Failure});
  const double P = model.predictor();
  const double m = model.mean_health();
  CHECK(P == doctest::Approx(0.625));
  const double expected = t - 1.0 / (lambda * P * m);
  CHECK(expected == doctest::Approx(4.8));
  CHECK(std::abs(first_refusal_time(model) - expected) <= 1e-9 * t);

  CHECK_FALSE(refusal_integral(model, 4.7).refuse_from_now);
  CHECK(refusal_integral(model, 4.9).refuse_from_now);
  CHECK(refusal_integral(model, 1.0).integral_value == doctest::Approx(lambda * P * m * 4.0));
}

TEST_CASE("refusal from now when the remaining mass is already small") {
  ArrivalModel<double> model(Intensity<double>::constant(0.1, 5.0));
  model.record({1.0, 0.8, Outcome::Success});
  CHECK(first_refusal_time(model) == 1.0);
  CHECK(refusal_integral(model, 1.0).refuse_from_now);
}

TEST_CASE("no success means the integral is zero and refusal holds at once") {
  ArrivalModel<double> model(Intensity<double>::constant(100.0, 5.0));
  CHECK(refusal_integral(model, 0.0).integral_value == 0.0);
  CHECK(first_refusal_time(model) == 0.0);
  model.record({2.0, 0.5, Outcome::Failure});
  CHECK(first_refusal_time(model) == 2.0);
}

TEST_CASE("refusal time under a piecewise intensity matches a grid scan") {
  ArrivalModel<double> model(piecewise());
  model.record({0.2, 0.6, Outcome::Success});
  model.record({0.4, 0.9, Outcome::Failure});
  const double found = first_refusal_time(model);
  const double scale = model.predictor() * model.mean_health();

  // Tail integrals by cumulative midpoint sums on a uniform grid.
  const int cells = 400000;
  const double step = (model.horizon() - model.now()) / cells;
  std::vector<double> tail(cells + 1, 0.0);
  for (int i = cells - 1; i >= 0; --i) {
    tail[i] = tail[i + 1] + model.intensity().rate_at(model.now() + (i + 0.5) * step) * step;
  }
  double scanned = model.horizon();
  for (int i = 0; i <= cells; ++i) {
    if (scale * tail[i] <= 1.0) {
      scanned = model.now() + i * step;
      break;
    }
  }
  CHECK(std::abs(found - scanned) <= 2 * step + 1e-9 * model.horizon());
  // scale = 0.5; the last unit of mass comes from [3,4], the rest from rate 10.
  CHECK(std::abs(found - (3.0 - (1.0 / scale - 1.0) / 10.0)) <= 1e-9 * model.horizon());
}

TEST_CASE("refusal integral is non-increasing in s") {
  ArrivalModel<double> model(piecewise());
  model.record({0.1, 0.7, Outcome::Success});
  double previous = refusal_integral(model, 0.1).integral_value;
  for (double s = 0.1; s <= 4.0; s += 0.01) {
    const double value = refusal_integral(model, s).integral_value;
    REQUIRE(value <= previous + 1e-12);
    previous = value;
  }
}
