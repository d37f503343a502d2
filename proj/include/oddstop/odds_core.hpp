#pragma once

// Known-probability last-success stopping: odds, the sum-the-odds threshold,
// win probabilities and treatment-order search.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "oddstop/errors.hpp"

namespace oddstop {

template <typename Scalar>
using Column = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

/// Success probabilities p_k of a known-odds instance together with the
/// failure probabilities q_k = 1 - p_k and odds r_k = p_k / q_k.
template <typename Scalar = double>
class OddsProfile {
 public:
  explicit OddsProfile(Column<Scalar> probs) : probs_(std::move(probs)) {
    if (probs_.size() == 0) {
      throw DomainError("odds profile needs at least one probability");
    }
    for (Index k = 0; k < probs_.size(); ++k) {
      const Scalar p = probs_[k];
      if (!(p > Scalar(0) && p < Scalar(1))) {
        throw DomainError("probability at index " + std::to_string(k) +
                              " must lie strictly inside (0,1)",
                          k);
      }
    }
    fails_ = Scalar(1) - probs_;
    odds_ = probs_ / fails_;
  }

  Index size() const noexcept { return probs_.size(); }
  const Column<Scalar>& probs() const noexcept { return probs_; }
  const Column<Scalar>& fails() const noexcept { return fails_; }
  const Column<Scalar>& odds() const noexcept { return odds_; }

  Scalar total_odds() const { return odds_.sum(); }

 private:
  Column<Scalar> probs_;
  Column<Scalar> fails_;
  Column<Scalar> odds_;
};

template <typename Derived>
OddsProfile<typename Derived::Scalar> odds_of(const Eigen::DenseBase<Derived>& probs) {
  return OddsProfile<typename Derived::Scalar>(probs.derived().array());
}

inline OddsProfile<double> odds_of(std::span<const double> probs) {
  return OddsProfile<double>(
      Eigen::Map<const Column<double>>(probs.data(), static_cast<Index>(probs.size())));
}

/// Threshold index (1-based) with the diagnostics R(n,s), Q(n,s) and V(n,s) = Q R.
/// Strategy: treat patients 1..s-1 unconditionally, then stop on the first
/// success at an index >= s.
template <typename Scalar = double>
struct StopPlan {
  Index s = 1;
  Scalar R = 0;
  Scalar Q = 1;
  Scalar V = 0;
};

namespace detail {

// Sum-the-odds over an arbitrary view: odds(i), fail(i) for 0-based i < n.
template <typename Scalar, typename OddsAt, typename FailAt>
StopPlan<Scalar> plan_over(Index n, OddsAt odds, FailAt fail) {
  StopPlan<Scalar> plan;
  Scalar running = 0;
  Scalar product = 1;
  Index k = n;
  for (; k >= 1; --k) {
    running += odds(k - 1);
    product *= fail(k - 1);
    if (running >= Scalar(1)) break;
  }
  plan.s = std::max<Index>(k, 1);
  plan.R = running;
  plan.Q = product;
  plan.V = product * running;
  return plan;
}

}  // namespace detail

/// Running sum r_n + r_{n-1} + ... until it first reaches 1; s = 1 if it never does.
template <typename Scalar>
StopPlan<Scalar> stop_index(const OddsProfile<Scalar>& profile) {
  const auto& r = profile.odds();
  const auto& q = profile.fails();
  return detail::plan_over<Scalar>(
      profile.size(), [&](Index i) { return r[i]; }, [&](Index i) { return q[i]; });
}

/// Smallest k in 0..n with r_{k+1} + ... + r_n < 1, reported as max(k, 1).
/// Evaluated directly from the forward-order definition as a cross-check on stop_index.
template <typename Scalar>
Index stop_index_dual(const OddsProfile<Scalar>& profile) {
  const auto& r = profile.odds();
  const Index n = profile.size();
  for (Index k = 0; k <= n; ++k) {
    Scalar tail = 0;
    for (Index j = k; j < n; ++j) tail += r[j];
    if (tail < Scalar(1)) return std::max<Index>(k, 1);
  }
  return n;  // unreachable: the empty tail is 0
}

/// V(n,s) for s = 1..n (entry s-1).
template <typename Scalar>
Column<Scalar> value_curve(const OddsProfile<Scalar>& profile) {
  const auto& r = profile.odds();
  const auto& q = profile.fails();
  const Index n = profile.size();
  Column<Scalar> values(n);
  Scalar running = 0;
  Scalar product = 1;
  for (Index k = n; k >= 1; --k) {
    running += r[k - 1];
    product *= q[k - 1];
    values[k - 1] = product * running;
  }
  return values;
}

/// Largest 1-based index attaining the maximum.
template <typename Derived>
Index argmax_last(const Eigen::DenseBase<Derived>& values) {
  Index best = 0;
  for (Index i = 1; i < values.size(); ++i) {
    if (values[i] >= values[best]) best = i;
  }
  return best + 1;
}

/// Non-decreasing up to some index, non-increasing afterwards (steps within tol are flat).
template <typename Derived>
bool is_unimodal(const Eigen::DenseBase<Derived>& values,
                 typename Derived::Scalar tol = typename Derived::Scalar(0)) {
  const Index n = values.size();
  Index i = 0;
  while (i + 1 < n && values[i + 1] >= values[i] - tol) ++i;
  while (i + 1 < n && values[i + 1] <= values[i] + tol) ++i;
  return i + 1 >= n;
}

inline constexpr Index kMaxOracleSize = 20;

/// Probability that the first success at index >= s is the last success,
/// by summing over all 2^n outcome words. Independent of the closed form V = Q R.
template <typename Scalar>
Scalar win_probability_oracle(const OddsProfile<Scalar>& profile, Index s) {
  const Index n = profile.size();
  if (n > kMaxOracleSize) {
    throw CostError("enumeration oracle limited to n <= 20, got n = " + std::to_string(n));
  }
  if (s < 1 || s > n) throw DomainError("stopping index out of range 1..n");
  const auto& p = profile.probs();
  const auto& q = profile.fails();
  const std::uint32_t words = std::uint32_t{1} << n;
  Scalar total = 0;
  for (std::uint32_t word = 0; word < words; ++word) {
    Index first_from_s = -1;
    Index last = -1;
    Scalar weight = 1;
    for (Index k = 0; k < n; ++k) {
      if (word >> k & 1u) {
        weight *= p[k];
        last = k;
        if (first_from_s < 0 && k >= s - 1) first_from_s = k;
      } else {
        weight *= q[k];
      }
    }
    if (first_from_s >= 0 && first_from_s == last) total += weight;
  }
  return total;
}

/// Probability of no success among patients k+1..n, for k in 0..n.
template <typename Scalar>
Scalar prob_no_further(const OddsProfile<Scalar>& profile, Index k) {
  if (k < 0 || k > profile.size()) throw DomainError("step out of range 0..n");
  return profile.fails().tail(profile.size() - k).prod();
}

template <typename Scalar = double>
struct OrderSearch {
  std::vector<Index> order;  // order[i] = original 0-based patient treated at position i
  StopPlan<Scalar> plan;
};

inline constexpr Index kDefaultMaxExhaustive = 10;

namespace detail {

template <typename Scalar>
StopPlan<Scalar> plan_for_order(const OddsProfile<Scalar>& profile,
                                const std::vector<Index>& order) {
  const auto& r = profile.odds();
  const auto& q = profile.fails();
  return plan_over<Scalar>(
      profile.size(), [&](Index i) { return r[order[i]]; },
      [&](Index i) { return q[order[i]]; });
}

// Strict improvement beyond a relative rounding band; keeps the earlier order on ties.
template <typename Scalar>
bool improves(Scalar candidate, Scalar best) {
  using std::abs;
  return candidate > best + Scalar(1e-12) * abs(best);
}

}  // namespace detail

/// Treatment order maximizing V over all n! permutations, ties resolved to the
/// lexicographically smallest order.
template <typename Scalar>
OrderSearch<Scalar> best_order(const OddsProfile<Scalar>& profile,
                               Index max_n_exhaustive = kDefaultMaxExhaustive) {
  const Index n = profile.size();
  if (n > max_n_exhaustive) {
    throw CostError("exhaustive order search limited to n <= " +
                    std::to_string(max_n_exhaustive) + ", got n = " + std::to_string(n) +
                    "; supply candidate orders instead");
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  OrderSearch<Scalar> best{order, detail::plan_for_order(profile, order)};
  while (std::next_permutation(order.begin(), order.end())) {
    auto plan = detail::plan_for_order(profile, order);
    if (detail::improves(plan.V, best.plan.V)) best = {order, plan};
  }
  return best;
}

/// Best among caller-supplied orders; ties go to the lexicographically smallest.
template <typename Scalar>
OrderSearch<Scalar> best_order(const OddsProfile<Scalar>& profile,
                               std::span<const std::vector<Index>> candidates) {
  if (candidates.empty()) throw DomainError("no candidate orders supplied");
  const auto n = static_cast<std::size_t>(profile.size());
  std::vector<std::vector<Index>> sorted(candidates.begin(), candidates.end());
  for (std::size_t c = 0; c < sorted.size(); ++c) {
    auto check = sorted[c];
    std::sort(check.begin(), check.end());
    bool is_perm = check.size() == n;
    for (std::size_t i = 0; is_perm && i < n; ++i) is_perm = check[i] == static_cast<Index>(i);
    if (!is_perm) {
      throw DomainError("candidate " + std::to_string(c) + " is not a permutation of 0..n-1",
                        static_cast<std::ptrdiff_t>(c));
    }
  }
  std::sort(sorted.begin(), sorted.end());
  OrderSearch<Scalar> best{sorted.front(), detail::plan_for_order(profile, sorted.front())};
  for (std::size_t c = 1; c < sorted.size(); ++c) {
    auto plan = detail::plan_for_order(profile, sorted[c]);
    if (detail::improves(plan.V, best.plan.V)) best = {sorted[c], plan};
  }
  return best;
}

/// Whenever the odds sum to at least 1 the optimal win probability is >= 1/e.
template <typename Scalar>
bool lower_bound_check(const StopPlan<Scalar>& plan, const OddsProfile<Scalar>& profile) {
  if (profile.total_odds() < Scalar(1)) return true;
  using std::exp;
  return plan.V >= exp(Scalar(-1)) - Scalar(1e-12);
}

}  // namespace oddstop
