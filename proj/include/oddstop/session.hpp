#pragma once

// A decision session is a fold over its append-only event log:
//   seq 0      created  {id, config}
//   seq 1..    outcome  {outcome, h?, time?, idempotency_key?}
//              consent  {decision: "continue" | "stop"}
// Replaying the log reproduces the live state and its JSON projection exactly.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oddstop/adaptive.hpp"
#include "oddstop/decision.hpp"
#include "oddstop/horizon.hpp"
#include "oddstop/instance.hpp"
#include "oddstop/odds_core.hpp"

namespace oddstop {

enum class Status { Active, Armed, Stopped, ConsentRequired };

std::string_view to_string(Status status) noexcept;

struct Event {
  std::uint64_t seq = 0;
  std::int64_t ts = 0;  // wall clock, milliseconds since the epoch
  std::string kind;
  nlohmann::json payload;
};

nlohmann::json to_json(const Event& event);
Event event_from_json(const nlohmann::json& line);

struct Recommendation {
  Action action = Action::Continue;
  Source source = Source::None;
  nlohmann::json figures;
};

nlohmann::json to_json(const Recommendation& rec);

class Session {
 public:
  /// Validates the configuration and returns the creation event.
  static Event creation_event(const std::string& id, const nlohmann::json& config,
                              std::int64_t ts);
  static Session from_created(const Event& created);
  static Session replay(std::span<const Event> log);

  /// Next event for an outcome post; throws ConflictError / ValidationError.
  /// Does not modify the session.
  Event outcome_event(const nlohmann::json& body, const std::optional<std::string>& key,
                      std::int64_t ts) const;
  Event consent_event(const nlohmann::json& body, std::int64_t ts) const;

  void apply(const Event& event);

  /// Recommendation issued right after the outcome recorded under this key.
  std::optional<Recommendation> recommendation_for_key(const std::string& key) const;

  const std::string& id() const noexcept { return id_; }
  Protocol protocol() const noexcept { return instance_.protocol; }
  Status status() const noexcept { return status_; }
  const Recommendation& recommendation() const noexcept { return recommendation_; }
  const std::vector<Event>& events() const noexcept { return events_; }
  Index treated() const noexcept;

  /// Read-only projection served by GET /v1/sessions/{id}.
  nlohmann::json snapshot() const;
  /// Informed-consent figures: expected further successes and probability of none.
  nlohmann::json report() const;

 private:
  Session(std::string id, Instance instance);

  void apply_outcome(const nlohmann::json& payload);
  void apply_consent(const nlohmann::json& payload);
  void set(Action action, Source source);
  nlohmann::json figures() const;

  std::string id_;
  Instance instance_;
  Status status_ = Status::Active;
  Recommendation recommendation_;
  std::vector<Event> events_;
  std::vector<Recommendation> history_;  // recommendation after events_[i]
  std::map<std::string, std::uint64_t> keys_;

  // P1
  StopPlan<double> plan_;
  std::vector<Outcome> outcomes_;
  // P2/P3
  std::optional<AdaptiveState<double>> adaptive_;
  // P4
  std::optional<ArrivalModel<double>> arrivals_;
};

}  // namespace oddstop
