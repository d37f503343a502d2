#pragma once

// Sequential estimation of the internal success probability p from
// health-weighted outcomes (p_k = h_k p) and the estimated-odds stopping rule.

#include <Eigen/Core>

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oddstop/decision.hpp"
#include "oddstop/errors.hpp"
#include "oddstop/odds_core.hpp"

namespace oddstop {

/// Health scores h_k in (0,1) and their prefix sums H_k.
template <typename Scalar = double>
class HealthScores {
 public:
  explicit HealthScores(Column<Scalar> h) : h_(std::move(h)) {
    if (h_.size() == 0) throw DomainError("health scores need at least one patient");
    for (Index k = 0; k < h_.size(); ++k) {
      if (!(h_[k] > Scalar(0) && h_[k] < Scalar(1))) {
        throw DomainError("health score at index " + std::to_string(k) +
                              " must lie strictly inside (0,1)",
                          k);
      }
    }
    prefix_.resize(h_.size());
    std::partial_sum(h_.begin(), h_.end(), prefix_.begin());
  }

  Index size() const noexcept { return h_.size(); }
  const Column<Scalar>& h() const noexcept { return h_; }
  // prefix()[k-1] = H_k
  const Column<Scalar>& prefix() const noexcept { return prefix_; }

 private:
  Column<Scalar> h_;
  Column<Scalar> prefix_;
};

inline HealthScores<double> health_scores(std::span<const double> h) {
  return HealthScores<double>(
      Eigen::Map<const Column<double>>(h.data(), static_cast<Index>(h.size())));
}

/// Scores from only h_min, h_max and a rank per patient (higher rank = better
/// health): patients sorted by rank are spread evenly over [h_min, h_max];
/// tied ranks share the midpoint of the span they occupy.
template <typename Scalar = double>
HealthScores<Scalar> spread_scores(Scalar h_min, Scalar h_max, std::span<const int> ranks) {
  if (ranks.empty()) throw DomainError("rank list is empty");
  if (!(h_min > Scalar(0) && h_min <= h_max && h_max < Scalar(1))) {
    throw DomainError("need 0 < h_min <= h_max < 1");
  }
  const auto n = static_cast<Index>(ranks.size());
  std::vector<Index> by_rank(static_cast<std::size_t>(n));
  std::iota(by_rank.begin(), by_rank.end(), Index{0});
  std::stable_sort(by_rank.begin(), by_rank.end(),
                   [&](Index a, Index b) { return ranks[a] < ranks[b]; });

  const Scalar step = n > 1 ? (h_max - h_min) / Scalar(n - 1) : Scalar(0);
  Column<Scalar> h(n);
  for (Index lo = 0; lo < n;) {
    Index hi = lo;
    while (hi + 1 < n && ranks[by_rank[hi + 1]] == ranks[by_rank[lo]]) ++hi;
    const Scalar position = n > 1 ? Scalar(lo + hi) / Scalar(2) : Scalar(0);
    const Scalar value = n > 1 ? h_min + step * position : (h_min + h_max) / Scalar(2);
    for (Index i = lo; i <= hi; ++i) h[by_rank[i]] = value;
    lo = hi + 1;
  }
  return HealthScores<Scalar>(std::move(h));
}

/// Online state: scores, outcomes observed so far, success count S_k.
template <typename Scalar = double>
class AdaptiveState {
 public:
  explicit AdaptiveState(HealthScores<Scalar> scores) : scores_(std::move(scores)) {
    outcomes_.reserve(static_cast<std::size_t>(scores_.size()));
  }

  void record(Outcome outcome) {
    if (k() >= n()) throw DomainError("all " + std::to_string(n()) + " patients already treated");
    outcomes_.push_back(outcome);
    if (is_success(outcome)) ++successes_;
  }

  AdaptiveState with(Outcome outcome) const {
    AdaptiveState next = *this;
    next.record(outcome);
    return next;
  }

  const HealthScores<Scalar>& scores() const noexcept { return scores_; }
  const std::vector<Outcome>& outcomes() const noexcept { return outcomes_; }
  Index n() const noexcept { return scores_.size(); }
  Index k() const noexcept { return static_cast<Index>(outcomes_.size()); }
  Index successes() const noexcept { return successes_; }
  Scalar health_sum() const { return k() == 0 ? Scalar(0) : scores_.prefix()[k() - 1]; }
  std::optional<Outcome> last_outcome() const {
    if (outcomes_.empty()) return std::nullopt;
    return outcomes_.back();
  }

 private:
  HealthScores<Scalar> scores_;
  std::vector<Outcome> outcomes_;
  Index successes_ = 0;
};

namespace detail {
template <typename Scalar>
void require_data(const AdaptiveState<Scalar>& state) {
  if (state.k() == 0) throw NoDataError("no treatment outcome recorded yet");
}
}  // namespace detail

/// p_hat_k = S_k / H_k (unbiased, maximum likelihood; may exceed 1).
template <typename Scalar>
Scalar estimate_p(const AdaptiveState<Scalar>& state) {
  detail::require_data(state);
  return Scalar(state.successes()) / state.health_sum();
}

/// Terms h_j S_k / [H_k - h_j S_k]^+ for j = k+1..n. A non-positive truncated
/// denominator gives +inf.
template <typename Scalar>
Column<Scalar> estimated_future_odds(const AdaptiveState<Scalar>& state) {
  detail::require_data(state);
  const Index k = state.k();
  const Scalar S = Scalar(state.successes());
  const Scalar H = state.health_sum();
  Column<Scalar> terms(state.n() - k);
  for (Index j = k; j < state.n(); ++j) {
    const Scalar num = state.scores().h()[j] * S;
    const Scalar den = std::max(Scalar(0), H - num);
    if (S == Scalar(0)) {
      terms[j - k] = Scalar(0);
    } else {
      terms[j - k] = den > Scalar(0) ? num / den : std::numeric_limits<Scalar>::infinity();
    }
  }
  return terms;
}

template <typename Scalar>
Scalar future_odds_sum(const AdaptiveState<Scalar>& state) {
  const auto terms = estimated_future_odds(state);
  return terms.size() == 0 ? Scalar(0) : terms.sum();
}

template <typename Scalar = double>
struct StopVerdict {
  Action action = Action::Continue;
  Scalar future_odds_sum = 0;
};

/// Estimated-odds rule after the k-th treatment:
///   S_k = 0                                         -> ConsentRequired
///   S_k >= 1, sum < 1, k-th outcome a success       -> Stop
///   S_k >= 1, k = n                                 -> Stop
///   otherwise                                       -> Continue
template <typename Scalar>
StopVerdict<Scalar> should_stop(const AdaptiveState<Scalar>& state) {
  detail::require_data(state);
  StopVerdict<Scalar> verdict;
  verdict.future_odds_sum = future_odds_sum(state);
  if (state.successes() == 0) {
    verdict.action = Action::ConsentRequired;
  } else if (state.k() == state.n()) {
    verdict.action = Action::Stop;
  } else if (verdict.future_odds_sum < Scalar(1) && is_success(*state.last_outcome())) {
    verdict.action = Action::Stop;
  }
  return verdict;
}

/// Informed-consent figures for the patients still waiting.
template <typename Scalar = double>
struct InferenceReport {
  Scalar p_hat = 0;
  Scalar future_odds_sum = 0;
  Scalar expected_further = 0;  // sum of p_hat_j, j > k
  Scalar prob_no_further = 1;   // product of q_hat_j, j > k
  bool clamped = false;         // some h_j p_hat_k exceeded 1
  Column<Scalar> future_probs;  // p_hat_j = min(1, h_j p_hat_k)
  Column<Scalar> future_fails;  // q_hat_j
};

template <typename Scalar>
InferenceReport<Scalar> inference_report(const AdaptiveState<Scalar>& state) {
  InferenceReport<Scalar> report;
  report.p_hat = estimate_p(state);
  report.future_odds_sum = future_odds_sum(state);
  const auto future_h = state.scores().h().tail(state.n() - state.k());
  const Column<Scalar> raw = future_h * report.p_hat;
  report.clamped = (raw > Scalar(1)).any();
  report.future_probs = raw.min(Scalar(1));
  report.future_fails = Scalar(1) - report.future_probs;
  report.expected_further = report.future_probs.sum();
  report.prob_no_further = report.future_fails.prod();
  return report;
}

/// Agreed lower threshold alpha on the probability of a further success, plus an
/// optional cap L on the beginning run of failures.
template <typename Scalar = double>
struct SequencePolicy {
  Scalar alpha = 0;
  std::optional<Index> max_initial_failures;

  void validate() const {
    if (!(alpha >= Scalar(0) && alpha < Scalar(1))) throw DomainError("alpha must lie in [0,1)");
    if (max_initial_failures && *max_initial_failures < 1) {
      throw DomainError("max_initial_failures must be at least 1");
    }
  }
};

template <typename Scalar>
bool threshold_stop(const InferenceReport<Scalar>& report, const SequencePolicy<Scalar>& policy) {
  return Scalar(1) - report.prob_no_further < policy.alpha;
}

}  // namespace oddstop
