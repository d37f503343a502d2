#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace oddstop {

enum class Outcome : std::uint8_t { Failure, Success };

enum class Action : std::uint8_t { Continue, Armed, Stop, ConsentRequired };

// Which rule produced a recommendation.
enum class Source : std::uint8_t {
  None,
  OddsRule,
  EstimatedOddsRule,
  Threshold,
  ConsentPolicy,
  Exhausted,
};

constexpr bool is_success(Outcome o) noexcept { return o == Outcome::Success; }

constexpr std::string_view to_string(Outcome o) noexcept {
  return o == Outcome::Success ? "+" : "-";
}

constexpr std::string_view to_string(Action a) noexcept {
  switch (a) {
    case Action::Continue: return "Continue";
    case Action::Armed: return "Armed";
    case Action::Stop: return "Stop";
    case Action::ConsentRequired: return "ConsentRequired";
  }
  return "?";
}

constexpr std::string_view to_string(Source s) noexcept {
  switch (s) {
    case Source::None: return "none";
    case Source::OddsRule: return "odds-rule";
    case Source::EstimatedOddsRule: return "estimated-odds-rule";
    case Source::Threshold: return "threshold";
    case Source::ConsentPolicy: return "consent-policy";
    case Source::Exhausted: return "exhausted";
  }
  return "?";
}

inline std::optional<Outcome> parse_outcome(std::string_view text) noexcept {
  if (text == "+" || text == "success") return Outcome::Success;
  if (text == "-" || text == "failure") return Outcome::Failure;
  return std::nullopt;
}

}  // namespace oddstop
