#pragma once

// JSON instance documents (schema "oddstop.instance/1"), shared by the CLI
// and the session service. Validation goes through the core type
// constructors, so the accepted documents are exactly the valid core values.

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

#include "oddstop/adaptive.hpp"
#include "oddstop/horizon.hpp"
#include "oddstop/odds_core.hpp"
#include "oddstop/simulator.hpp"

namespace oddstop {

inline constexpr std::string_view kInstanceSchema = "oddstop.instance/1";

enum class Protocol { P1, P2, P3, P4 };

std::string_view to_string(Protocol protocol) noexcept;

struct KnownOddsInstance {
  OddsProfile<double> profile;
  std::optional<double> alpha;  // optional lower threshold on a further success
};

struct AdaptiveInstance {
  HealthScores<double> scores;
  SequencePolicy<double> policy;
};

struct HorizonInstance {
  ArrivalModel<double> model;  // no arrivals yet
};

struct Instance {
  Protocol protocol = Protocol::P1;
  std::variant<KnownOddsInstance, AdaptiveInstance, HorizonInstance> body;
  // simulation-only parameters
  std::optional<double> true_p;
  sim::HealthRange health;
};

/// Throws ValidationError carrying a JSON pointer to the offending field.
Instance parse_instance(const nlohmann::json& doc);

/// Canonical form: explicit protocol, expanded h vector, intensity table.
nlohmann::json canonical_json(const Instance& instance);

}  // namespace oddstop
