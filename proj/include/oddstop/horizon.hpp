#pragma once

// Refusal rule for an unknown stream of treatment requests arriving as an
// inhomogeneous Poisson process on [0, t].

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "oddstop/decision.hpp"
#include "oddstop/errors.hpp"
#include "oddstop/odds_core.hpp"

namespace oddstop {

/// Piecewise-constant arrival intensity: rates[i] on [knots[i], knots[i+1]).
/// knots[0] = 0 and knots.back() = t.
template <typename Scalar = double>
class Intensity {
 public:
  Intensity(Column<Scalar> knots, Column<Scalar> rates)
      : knots_(std::move(knots)), rates_(std::move(rates)) {
    if (rates_.size() == 0 || knots_.size() != rates_.size() + 1) {
      throw DomainError("intensity needs m >= 1 rates and m + 1 knots");
    }
    if (knots_[0] != Scalar(0)) throw DomainError("first knot must be 0", 0);
    for (Index i = 0; i < rates_.size(); ++i) {
      if (!(knots_[i + 1] > knots_[i]) || !std::isfinite(double(knots_[i + 1]))) {
        throw DomainError("knots must be finite and strictly increasing", i + 1);
      }
      if (!(rates_[i] >= Scalar(0)) || !std::isfinite(double(rates_[i]))) {
        throw DomainError("rates must be finite and non-negative", i);
      }
    }
  }

  static Intensity constant(Scalar rate, Scalar horizon) {
    if (!(horizon > Scalar(0))) throw DomainError("horizon must be positive");
    Column<Scalar> knots(2);
    knots << Scalar(0), horizon;
    Column<Scalar> rates(1);
    rates << rate;
    return Intensity(std::move(knots), std::move(rates));
  }

  // lambda = r / t for r requests expected over the horizon
  static Intensity from_expected_count(Scalar expected, Scalar horizon) {
    if (!(horizon > Scalar(0))) throw DomainError("horizon must be positive");
    return constant(expected / horizon, horizon);
  }

  Scalar horizon() const { return knots_[knots_.size() - 1]; }
  const Column<Scalar>& knots() const noexcept { return knots_; }
  const Column<Scalar>& rates() const noexcept { return rates_; }
  Scalar max_rate() const { return rates_.maxCoeff(); }

  Scalar rate_at(Scalar u) const {
    for (Index i = 0; i < rates_.size(); ++i) {
      if (u < knots_[i + 1]) return rates_[i];
    }
    return rates_[rates_.size() - 1];
  }

  /// Exact integral of lambda over [a, b] within [0, t].
  Scalar integral(Scalar a, Scalar b) const {
    Scalar total = 0;
    for (Index i = 0; i < rates_.size(); ++i) {
      const Scalar lo = std::max(a, knots_[i]);
      const Scalar hi = std::min(b, knots_[i + 1]);
      if (hi > lo) total += rates_[i] * (hi - lo);
    }
    return total;
  }

 private:
  Column<Scalar> knots_;
  Column<Scalar> rates_;
};

template <typename Scalar = double>
struct Arrival {
  Scalar time = 0;
  Scalar h = 0;
  Outcome outcome = Outcome::Failure;
};

/// Intensity and horizon plus the arrivals observed so far, from which the
/// predictor P = S / H and the mean health score m_h are estimated.
template <typename Scalar = double>
class ArrivalModel {
 public:
  explicit ArrivalModel(Intensity<Scalar> intensity, Scalar prior_mean_h = Scalar(0.5))
      : intensity_(std::move(intensity)), prior_mean_h_(prior_mean_h) {
    if (!(prior_mean_h_ >= Scalar(0) && prior_mean_h_ <= Scalar(1))) {
      throw DomainError("prior mean health score must lie in [0,1]");
    }
  }

  const Intensity<Scalar>& intensity() const noexcept { return intensity_; }
  Scalar horizon() const { return intensity_.horizon(); }
  Scalar prior_mean_h() const noexcept { return prior_mean_h_; }
  const std::vector<Arrival<Scalar>>& arrivals() const noexcept { return arrivals_; }
  Index count() const noexcept { return static_cast<Index>(arrivals_.size()); }
  Index successes() const noexcept { return successes_; }
  Scalar now() const { return arrivals_.empty() ? Scalar(0) : arrivals_.back().time; }

  Scalar predictor() const {
    return arrivals_.empty() ? Scalar(0) : Scalar(successes_) / health_sum_;
  }
  Scalar mean_health() const {
    return arrivals_.empty() ? prior_mean_h_ : health_sum_ / Scalar(count());
  }
  bool mean_is_prior() const noexcept { return arrivals_.empty(); }

  void record(const Arrival<Scalar>& arrival) {
    if (!(arrival.time >= Scalar(0) && arrival.time <= horizon())) {
      throw DomainError("arrival time outside the horizon [0, t]");
    }
    if (arrival.time < now()) throw DomainError("arrivals must be recorded in time order");
    if (!(arrival.h > Scalar(0) && arrival.h < Scalar(1))) {
      throw DomainError("health score must lie strictly inside (0,1)");
    }
    arrivals_.push_back(arrival);
    health_sum_ += arrival.h;
    if (is_success(arrival.outcome)) ++successes_;
  }

 private:
  Intensity<Scalar> intensity_;
  Scalar prior_mean_h_;
  std::vector<Arrival<Scalar>> arrivals_;
  Scalar health_sum_ = 0;
  Index successes_ = 0;
};

template <typename Scalar>
ArrivalModel<Scalar> update_on_arrival(ArrivalModel<Scalar> model, Scalar time, Scalar h,
                                       Outcome outcome) {
  model.record({time, h, outcome});
  return model;
}

template <typename Scalar = double>
struct RefusalDecision {
  Scalar integral_value = 0;
  bool refuse_from_now = false;
};

/// integral_s^t lambda(u) P_s m_h(s) du with P and m_h frozen at their time-s values.
template <typename Scalar>
RefusalDecision<Scalar> refusal_integral(const ArrivalModel<Scalar>& model, Scalar s) {
  if (!(s >= Scalar(0) && s <= model.horizon())) {
    throw DomainError("refusal time outside the horizon [0, t]");
  }
  RefusalDecision<Scalar> decision;
  decision.integral_value =
      model.predictor() * model.mean_health() * model.intensity().integral(s, model.horizon());
  decision.refuse_from_now = decision.integral_value <= Scalar(1);
  return decision;
}

/// Smallest s in [now, t] with integral <= 1, by bisection to 1e-9 t.
template <typename Scalar>
Scalar first_refusal_time(const ArrivalModel<Scalar>& model) {
  Scalar lo = model.now();
  Scalar hi = model.horizon();
  if (refusal_integral(model, lo).refuse_from_now) return lo;
  const Scalar tol = Scalar(1e-9) * model.horizon() / Scalar(2);
  for (int iter = 0; iter < 200 && hi - lo > tol; ++iter) {
    const Scalar mid = lo + (hi - lo) / Scalar(2);
    if (refusal_integral(model, mid).refuse_from_now) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace oddstop
