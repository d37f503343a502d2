#include "oddstop/session.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oddstop {

using nlohmann::json;

std::string_view to_string(Status status) noexcept {
  switch (status) {
    case Status::Active: return "Active";
    case Status::Armed: return "Armed";
    case Status::Stopped: return "Stopped";
    case Status::ConsentRequired: return "ConsentRequired";
  }
  return "?";
}

json to_json(const Event& event) {
  return {{"seq", event.seq}, {"ts", event.ts}, {"kind", event.kind}, {"payload", event.payload}};
}

Event event_from_json(const json& line) {
  Event e;
  e.seq = line.at("seq").get<std::uint64_t>();
  e.ts = line.at("ts").get<std::int64_t>();
  e.kind = line.at("kind").get<std::string>();
  e.payload = line.at("payload");
  return e;
}

json to_json(const Recommendation& rec) {
  return {{"action", to_string(rec.action)},
          {"source", to_string(rec.source)},
          {"figures", rec.figures}};
}

namespace {

std::vector<double> to_vector(const Column<double>& c) { return {c.begin(), c.end()}; }

// +inf (a truncated odds term) has no JSON spelling; it is reported as null plus a flag.
void put_sum(json& out, double sum) {
  out["future_odds_unbounded"] = std::isinf(sum);
  out["future_odds_sum"] = std::isinf(sum) ? json(nullptr) : json(sum);
}

json plan_json(const StopPlan<double>& plan) {
  return {{"s", plan.s}, {"R", plan.R}, {"Q", plan.Q}, {"V", plan.V}};
}

Status status_for(Action action) {
  switch (action) {
    case Action::Continue: return Status::Active;
    case Action::Armed: return Status::Armed;
    case Action::Stop: return Status::Stopped;
    case Action::ConsentRequired: return Status::ConsentRequired;
  }
  return Status::Active;
}

}  // namespace

Session::Session(std::string id, Instance instance)
    : id_(std::move(id)), instance_(std::move(instance)) {
  std::visit(
      [&](const auto& body) {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, KnownOddsInstance>) {
          plan_ = stop_index(body.profile);
        } else if constexpr (std::is_same_v<T, AdaptiveInstance>) {
          adaptive_.emplace(body.scores);
        } else {
          arrivals_.emplace(body.model);
        }
      },
      instance_.body);
}

Event Session::creation_event(const std::string& id, const json& config, std::int64_t ts) {
  const Instance instance = parse_instance(config);
  return {0, ts, "created", {{"id", id}, {"config", canonical_json(instance)}}};
}

Session Session::from_created(const Event& created) {
  if (created.kind != "created" || created.seq != 0) {
    throw std::runtime_error("event log must start with a created event at seq 0");
  }
  Session session(created.payload.at("id").get<std::string>(),
                  parse_instance(created.payload.at("config")));
  if (session.instance_.protocol == Protocol::P1 && session.plan_.s == 1) {
    session.set(Action::Armed, Source::OddsRule);
  } else {
    session.set(Action::Continue, Source::None);
  }
  session.events_.push_back(created);
  session.history_.push_back(session.recommendation_);
  return session;
}

Session Session::replay(std::span<const Event> log) {
  if (log.empty()) throw std::runtime_error("empty event log");
  Session session = from_created(log.front());
  for (const auto& event : log.subspan(1)) session.apply(event);
  return session;
}

Index Session::treated() const noexcept {
  if (adaptive_) return adaptive_->k();
  if (arrivals_) return arrivals_->count();
  return static_cast<Index>(outcomes_.size());
}

Event Session::outcome_event(const json& body, const std::optional<std::string>& key,
                             std::int64_t ts) const {
  if (status_ == Status::Stopped) throw ConflictError("session " + id_ + " is stopped");
  if (status_ == Status::ConsentRequired) {
    throw ConflictError("session " + id_ + " awaits a consent decision");
  }
  if (!body.is_object()) throw ValidationError("", "body must be a JSON object");
  if (!body.contains("outcome") || !body.at("outcome").is_string() ||
      !parse_outcome(body.at("outcome").get<std::string>())) {
    throw ValidationError("/outcome", "outcome must be \"+\" or \"-\"");
  }
  json payload = {{"outcome", to_string(*parse_outcome(body.at("outcome").get<std::string>()))}};
  if (arrivals_) {
    if (!body.contains("h") || !body.at("h").is_number()) {
      throw ValidationError("/h", "observed health score h required for P4");
    }
    if (!body.contains("time") || !body.at("time").is_number()) {
      throw ValidationError("/time", "arrival time required for P4");
    }
    const double h = body.at("h").get<double>();
    const double time = body.at("time").get<double>();
    if (!(h > 0.0 && h < 1.0)) throw ValidationError("/h", "h must lie strictly inside (0,1)");
    if (!(time >= arrivals_->now() && time <= arrivals_->horizon())) {
      throw ValidationError("/time", "arrival time must lie in [last arrival, t]");
    }
    payload["h"] = h;
    payload["time"] = time;
  }
  if (key) payload["idempotency_key"] = *key;
  return {events_.size(), ts, "outcome", std::move(payload)};
}

Event Session::consent_event(const json& body, std::int64_t ts) const {
  if (status_ != Status::ConsentRequired) {
    throw ConflictError("session " + id_ + " is not awaiting consent");
  }
  if (!body.is_object() || !body.contains("decision") ||
      (body.at("decision") != "continue" && body.at("decision") != "stop")) {
    throw ValidationError("/decision", "decision must be \"continue\" or \"stop\"");
  }
  return {events_.size(), ts, "consent", {{"decision", body.at("decision")}}};
}

void Session::apply(const Event& event) {
  if (event.seq != events_.size()) {
    throw std::runtime_error("event seq " + std::to_string(event.seq) + " out of order");
  }
  if (event.kind == "outcome") {
    apply_outcome(event.payload);
  } else if (event.kind == "consent") {
    apply_consent(event.payload);
  } else {
    throw std::runtime_error("unexpected event kind " + event.kind);
  }
  events_.push_back(event);
  history_.push_back(recommendation_);
  if (event.payload.contains("idempotency_key")) {
    keys_.emplace(event.payload.at("idempotency_key").get<std::string>(), event.seq);
  }
}

std::optional<Recommendation> Session::recommendation_for_key(const std::string& key) const {
  auto it = keys_.find(key);
  if (it == keys_.end()) return std::nullopt;
  return history_.at(it->second);
}

void Session::set(Action action, Source source) {
  recommendation_.action = action;
  recommendation_.source = source;
  status_ = status_for(action);
  recommendation_.figures = figures();
}

void Session::apply_outcome(const json& payload) {
  const Outcome outcome = *parse_outcome(payload.at("outcome").get<std::string>());

  if (arrivals_) {
    const double time = payload.at("time").get<double>();
    arrivals_->record({time, payload.at("h").get<double>(), outcome});
    if (arrivals_->successes() == 0) {
      set(Action::ConsentRequired, Source::ConsentPolicy);
    } else if (is_success(outcome) && refusal_integral(*arrivals_, time).refuse_from_now) {
      set(Action::Stop, Source::EstimatedOddsRule);
    } else {
      set(Action::Continue, Source::None);
    }
    return;
  }

  if (adaptive_) {
    auto& state = *adaptive_;
    state.record(outcome);
    const auto verdict = should_stop(state);
    const auto& policy = std::get<AdaptiveInstance>(instance_.body).policy;
    const bool at_end = state.k() == state.n();
    if (verdict.action == Action::Stop) {
      const bool by_rule = is_success(outcome) && verdict.future_odds_sum < 1.0;
      set(Action::Stop, by_rule ? Source::EstimatedOddsRule : Source::Exhausted);
    } else if (at_end) {
      set(Action::Stop, Source::Exhausted);
    } else if (verdict.action == Action::ConsentRequired) {
      const bool capped = instance_.protocol == Protocol::P3 && policy.max_initial_failures &&
                          state.k() >= *policy.max_initial_failures;
      if (capped) {
        set(Action::Stop, Source::ConsentPolicy);
      } else {
        set(Action::ConsentRequired, Source::ConsentPolicy);
      }
    } else if (instance_.protocol == Protocol::P3 &&
               threshold_stop(inference_report(state), policy)) {
      set(Action::Stop, Source::Threshold);
    } else {
      set(Action::Continue, Source::None);
    }
    return;
  }

  const auto& known = std::get<KnownOddsInstance>(instance_.body);
  outcomes_.push_back(outcome);
  const auto k = static_cast<Index>(outcomes_.size());
  const Index n = known.profile.size();
  if (k >= plan_.s && is_success(outcome)) {
    set(Action::Stop, Source::OddsRule);
  } else if (k == n) {
    set(Action::Stop, Source::Exhausted);
  } else if (known.alpha && k + 1 >= plan_.s &&
             1.0 - prob_no_further(known.profile, k) < *known.alpha) {
    set(Action::Stop, Source::Threshold);
  } else if (k + 1 >= plan_.s) {
    set(Action::Armed, Source::OddsRule);
  } else {
    set(Action::Continue, Source::None);
  }
}

void Session::apply_consent(const json& payload) {
  if (payload.at("decision") == "stop") {
    set(Action::Stop, Source::ConsentPolicy);
  } else {
    set(Action::Continue, Source::ConsentPolicy);
  }
}

json Session::report() const {
  json out;
  if (adaptive_) {
    if (adaptive_->k() == 0) return nullptr;
    const auto r = inference_report(*adaptive_);
    out = {{"k", adaptive_->k()},
           {"successes", adaptive_->successes()},
           {"p_hat", r.p_hat},
           {"expected_further", r.expected_further},
           {"prob_no_further", r.prob_no_further},
           {"further_success_prob", 1.0 - r.prob_no_further},
           {"clamped", r.clamped},
           {"future_probs", to_vector(r.future_probs)}};
    put_sum(out, r.future_odds_sum);
    return out;
  }
  if (arrivals_) {
    const auto& model = *arrivals_;
    const auto now = refusal_integral(model, model.now());
    out = {{"arrivals", model.count()},
           {"successes", model.successes()},
           {"now", model.now()},
           {"predictor", model.predictor()},
           {"mean_health", model.mean_health()},
           {"mean_is_prior", model.mean_is_prior()},
           {"integral_value", now.integral_value},
           {"refuse_from_now", now.refuse_from_now},
           {"first_refusal_time", first_refusal_time(model)},
           {"expected_further", now.integral_value},
           {"prob_no_further", std::exp(-now.integral_value)},
           {"further_success_prob", 1.0 - std::exp(-now.integral_value)}};
    return out;
  }
  const auto& profile = std::get<KnownOddsInstance>(instance_.body).profile;
  const auto k = static_cast<Index>(outcomes_.size());
  const double none = prob_no_further(profile, k);
  out = {{"k", k},
         {"successes", std::count(outcomes_.begin(), outcomes_.end(), Outcome::Success)},
         {"expected_further", profile.probs().tail(profile.size() - k).sum()},
         {"prob_no_further", none},
         {"further_success_prob", 1.0 - none}};
  return out;
}

json Session::figures() const {
  if (instance_.protocol == Protocol::P1) {
    const auto& profile = std::get<KnownOddsInstance>(instance_.body).profile;
    return {{"plan", plan_json(plan_)},
            {"value_curve", to_vector(value_curve(profile))},
            {"k", outcomes_.size()},
            {"report", report()}};
  }
  if (adaptive_ && adaptive_->k() == 0) return {{"k", 0}};
  return report();
}

json Session::snapshot() const {
  json outcomes = json::array();
  for (const auto& e : events_) {
    if (e.kind != "outcome") continue;
    json item = {{"seq", e.seq}, {"ts", e.ts}, {"outcome", e.payload.at("outcome")}};
    if (e.payload.contains("h")) item["h"] = e.payload.at("h");
    if (e.payload.contains("time")) item["time"] = e.payload.at("time");
    outcomes.push_back(std::move(item));
  }
  return {{"id", id_},
          {"protocol", to_string(instance_.protocol)},
          {"status", to_string(status_)},
          {"config", events_.front().payload.at("config")},
          {"created_ts", events_.front().ts},
          {"event_count", events_.size()},
          {"treated", treated()},
          {"outcomes", std::move(outcomes)},
          {"recommendation", to_json(recommendation_)},
          {"report", report()}};
}

}  // namespace oddstop
