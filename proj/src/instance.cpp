#include "oddstop/instance.hpp"

#include <cmath>
#include <vector>

namespace oddstop {

using nlohmann::json;

std::string_view to_string(Protocol protocol) noexcept {
  switch (protocol) {
    case Protocol::P1: return "P1";
    case Protocol::P2: return "P2";
    case Protocol::P3: return "P3";
    case Protocol::P4: return "P4";
  }
  return "?";
}

namespace {

std::string child(const std::string& path, std::string_view key) {
  return path + "/" + std::string(key);
}

std::string element(const std::string& path, std::ptrdiff_t index) {
  return index < 0 ? path : path + "/" + std::to_string(index);
}

double number_at(const json& doc, const std::string& key, const std::string& path) {
  if (!doc.contains(key)) throw ValidationError(child(path, key), "required number missing");
  const auto& v = doc.at(key);
  if (!v.is_number()) throw ValidationError(child(path, key), "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ValidationError(child(path, key), "expected a finite number");
  return x;
}

std::optional<double> optional_number(const json& doc, const std::string& key) {
  if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
  return number_at(doc, key, "");
}

std::vector<double> numbers_at(const json& doc, const std::string& key) {
  const std::string path = "/" + key;
  const auto& v = doc.at(key);
  if (!v.is_array()) throw ValidationError(path, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ValidationError(element(path, std::ptrdiff_t(i)), "expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

Column<double> to_column(const std::vector<double>& v) {
  return Eigen::Map<const Column<double>>(v.data(), static_cast<Index>(v.size()));
}

Protocol infer_protocol(const json& doc) {
  if (doc.contains("protocol")) {
    const auto& p = doc.at("protocol");
    if (p == "P1") return Protocol::P1;
    if (p == "P2") return Protocol::P2;
    if (p == "P3") return Protocol::P3;
    if (p == "P4") return Protocol::P4;
    throw ValidationError("/protocol", "protocol must be one of P1, P2, P3, P4");
  }
  if (doc.contains("probs")) return Protocol::P1;
  if (doc.contains("horizon") || doc.contains("intensity")) return Protocol::P4;
  if (doc.contains("h") || doc.contains("scores")) {
    return doc.contains("alpha") || doc.contains("max_initial_failures") ? Protocol::P3
                                                                         : Protocol::P2;
  }
  throw ValidationError("/protocol", "cannot infer protocol: give probs, h or horizon");
}

KnownOddsInstance parse_known(const json& doc) {
  if (!doc.contains("probs")) throw ValidationError("/probs", "P1 requires probs");
  const auto probs = numbers_at(doc, "probs");
  if (probs.empty()) throw ValidationError("/probs", "at least one probability required");
  try {
    KnownOddsInstance out{OddsProfile<double>(to_column(probs)), optional_number(doc, "alpha")};
    if (out.alpha && !(*out.alpha >= 0.0 && *out.alpha < 1.0)) {
      throw ValidationError("/alpha", "alpha must lie in [0,1)");
    }
    return out;
  } catch (const DomainError& e) {
    throw ValidationError(element("/probs", e.index()), e.what());
  }
}

HealthScores<double> parse_scores(const json& doc) {
  std::vector<double> h;
  if (doc.contains("scores")) {
    const auto& s = doc.at("scores");
    if (!s.is_object()) throw ValidationError("/scores", "expected {h_min, h_max, ranks}");
    const double lo = number_at(s, "h_min", "/scores");
    const double hi = number_at(s, "h_max", "/scores");
    if (!s.contains("ranks") || !s.at("ranks").is_array()) {
      throw ValidationError("/scores/ranks", "expected an array of integer ranks");
    }
    std::vector<int> ranks;
    for (std::size_t i = 0; i < s.at("ranks").size(); ++i) {
      const auto& r = s.at("ranks")[i];
      if (!r.is_number_integer()) {
        throw ValidationError(element("/scores/ranks", std::ptrdiff_t(i)), "expected an integer");
      }
      ranks.push_back(r.get<int>());
    }
    try {
      return spread_scores<double>(lo, hi, ranks);
    } catch (const DomainError& e) {
      throw ValidationError("/scores", e.what());
    }
  }
  if (!doc.contains("h")) throw ValidationError("/h", "health scores h required");
  if (doc.at("h").is_number()) {
    if (!doc.contains("n") || !doc.at("n").is_number_integer()) {
      throw ValidationError("/n", "a scalar h needs an integer patient count n");
    }
    const auto n = doc.at("n").get<long long>();
    if (n < 1) throw ValidationError("/n", "n must be at least 1");
    h.assign(static_cast<std::size_t>(n), doc.at("h").get<double>());
  } else {
    h = numbers_at(doc, "h");
    if (doc.contains("n")) {
      if (!doc.at("n").is_number_integer() || doc.at("n").get<long long>() < 1) {
        throw ValidationError("/n", "n must be an integer >= 1");
      }
      if (doc.at("n").get<std::size_t>() != h.size()) {
        throw ValidationError("/n", "n does not match the length of h");
      }
    }
  }
  if (h.empty()) throw ValidationError("/h", "at least one patient required (n >= 1)");
  try {
    return HealthScores<double>(to_column(h));
  } catch (const DomainError& e) {
    throw ValidationError(doc.at("h").is_array() ? element("/h", e.index()) : "/h", e.what());
  }
}

AdaptiveInstance parse_adaptive(const json& doc, Protocol protocol) {
  AdaptiveInstance out{parse_scores(doc), {}};
  if (protocol == Protocol::P3) {
    out.policy.alpha = optional_number(doc, "alpha").value_or(0.0);
    if (doc.contains("max_initial_failures") && !doc.at("max_initial_failures").is_null()) {
      const auto& l = doc.at("max_initial_failures");
      if (!l.is_number_integer()) {
        throw ValidationError("/max_initial_failures", "expected an integer");
      }
      out.policy.max_initial_failures = l.get<Index>();
    }
    try {
      out.policy.validate();
    } catch (const DomainError& e) {
      const bool alpha_bad = !(out.policy.alpha >= 0.0 && out.policy.alpha < 1.0);
      throw ValidationError(alpha_bad ? "/alpha" : "/max_initial_failures", e.what());
    }
  }
  return out;
}

HorizonInstance parse_horizon(const json& doc) {
  const double prior = optional_number(doc, "prior_mean_h").value_or(0.5);
  try {
    if (doc.contains("intensity")) {
      const auto& in = doc.at("intensity");
      if (!in.is_object() || !in.contains("knots") || !in.contains("rates")) {
        throw ValidationError("/intensity", "expected {knots, rates}");
      }
      std::vector<double> knots;
      std::vector<double> rates;
      try {
        knots = numbers_at(in, "knots");
        rates = numbers_at(in, "rates");
      } catch (const ValidationError& e) {
        throw ValidationError("/intensity" + e.path(), e.what());
      }
      try {
        Intensity<double> intensity(to_column(knots), to_column(rates));
        return {ArrivalModel<double>(std::move(intensity), prior)};
      } catch (const DomainError& e) {
        throw ValidationError("/intensity", e.what());
      }
    }
    if (!doc.contains("horizon")) throw ValidationError("/horizon", "P4 requires horizon t");
    const double t = number_at(doc, "horizon", "");
    if (!(t > 0.0)) throw ValidationError("/horizon", "horizon must be positive");
    if (doc.contains("expected_requests")) {
      const double r = number_at(doc, "expected_requests", "");
      if (!(r >= 0.0)) throw ValidationError("/expected_requests", "must be non-negative");
      return {ArrivalModel<double>(Intensity<double>::from_expected_count(r, t), prior)};
    }
    if (doc.contains("rate")) {
      const double rate = number_at(doc, "rate", "");
      if (!(rate >= 0.0)) throw ValidationError("/rate", "must be non-negative");
      return {ArrivalModel<double>(Intensity<double>::constant(rate, t), prior)};
    }
    throw ValidationError("/expected_requests", "give expected_requests, rate or intensity");
  } catch (const DomainError& e) {
    throw ValidationError("/prior_mean_h", e.what());
  }
}

}  // namespace

Instance parse_instance(const json& doc) {
  if (!doc.is_object()) throw ValidationError("", "instance must be a JSON object");
  if (doc.contains("schema") && doc.at("schema") != kInstanceSchema) {
    throw ValidationError("/schema", "unsupported schema, expected " + std::string(kInstanceSchema));
  }
  const Protocol protocol = infer_protocol(doc);
  auto make = [&]() -> Instance {
    switch (protocol) {
      case Protocol::P1: return {protocol, parse_known(doc), std::nullopt, {}};
      case Protocol::P2:
      case Protocol::P3: return {protocol, parse_adaptive(doc, protocol), std::nullopt, {}};
      case Protocol::P4: return {protocol, parse_horizon(doc), std::nullopt, {}};
    }
    throw ValidationError("/protocol", "unknown protocol");
  };
  Instance instance = make();
  instance.true_p = optional_number(doc, "true_p");
  if (instance.true_p && !(*instance.true_p > 0.0 && *instance.true_p < 1.0)) {
    throw ValidationError("/true_p", "true_p must lie strictly inside (0,1)");
  }
  if (doc.contains("health_range")) {
    const auto range = numbers_at(doc, "health_range");
    if (range.size() != 2 || !(range[0] > 0.0 && range[0] <= range[1] && range[1] < 1.0)) {
      throw ValidationError("/health_range", "expected [lo, hi] with 0 < lo <= hi < 1");
    }
    instance.health = {range[0], range[1]};
  }
  return instance;
}

json canonical_json(const Instance& instance) {
  json doc = {{"schema", kInstanceSchema}, {"protocol", to_string(instance.protocol)}};
  auto as_vector = [](const Column<double>& c) { return std::vector<double>(c.begin(), c.end()); };
  std::visit(
      [&](const auto& body) {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, KnownOddsInstance>) {
          doc["probs"] = as_vector(body.profile.probs());
          if (body.alpha) doc["alpha"] = *body.alpha;
        } else if constexpr (std::is_same_v<T, AdaptiveInstance>) {
          doc["h"] = as_vector(body.scores.h());
          if (instance.protocol == Protocol::P3) {
            doc["alpha"] = body.policy.alpha;
            if (body.policy.max_initial_failures) {
              doc["max_initial_failures"] = *body.policy.max_initial_failures;
            }
          }
        } else {
          doc["intensity"] = {{"knots", as_vector(body.model.intensity().knots())},
                              {"rates", as_vector(body.model.intensity().rates())}};
          doc["prior_mean_h"] = body.model.prior_mean_h();
        }
      },
      instance.body);
  return doc;
}

}  // namespace oddstop
