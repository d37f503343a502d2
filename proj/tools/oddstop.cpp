// oddstop: plan, simulate, serve and replay last-success stopping sessions.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oddstop/instance.hpp"
#include "oddstop/odds_core.hpp"
#include "oddstop/service.hpp"
#include "oddstop/session.hpp"
#include "oddstop/session_store.hpp"
#include "oddstop/simulator.hpp"

using nlohmann::json;
using namespace oddstop;

namespace {

// Two decimals without the leading zero: 0.25 -> ".25", 0.10 -> ".1", 1.04 -> "1.04".
std::string tableau_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  std::string s = buf;
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  if (s.rfind("0.", 0) == 0) s.erase(0, 1);
  return s.empty() ? "0" : s;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ValidationError("/probs", "not a number: '" + item + "'");
    }
  }
  return out;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

Instance load_instance(const std::string& file, const std::string& probs) {
  if (!file.empty()) return parse_instance(read_json_file(file));
  if (!probs.empty()) return parse_instance(json{{"protocol", "P1"}, {"probs", parse_list(probs)}});
  throw ValidationError("", "give --instance FILE or --probs p1,p2,...");
}

std::vector<double> to_vector(const Column<double>& c) { return {c.begin(), c.end()}; }

json plan_json(const StopPlan<double>& plan) {
  return {{"s", plan.s}, {"R", plan.R}, {"Q", plan.Q}, {"V", plan.V}};
}

struct PlanArgs {
  std::string instance;
  std::string probs;
  bool json = false;
  bool best_order = false;
  long max_exhaustive = kDefaultMaxExhaustive;
  double alpha = -1;
};

int cmd_plan(const PlanArgs& args) {
  const Instance instance = load_instance(args.instance, args.probs);
  const auto* known = std::get_if<KnownOddsInstance>(&instance.body);
  if (known == nullptr) throw ValidationError("/protocol", "plan needs a P1 instance (probs)");
  const auto& profile = known->profile;
  const Index n = profile.size();
  const auto plan = stop_index(profile);
  const auto curve = value_curve(profile);

  const Column<double> p_rev = profile.probs().reverse();
  const Column<double> q_rev = profile.fails().reverse();
  const Column<double> r_rev = profile.odds().reverse();

  json out = {{"n", n},
              {"tableau", {{"p", to_vector(p_rev)}, {"q", to_vector(q_rev)},
                           {"r", to_vector(r_rev.head(n - plan.s + 1))}}},
              {"plan", plan_json(plan)},
              {"value_curve", to_vector(curve)}};

  const double alpha = args.alpha >= 0 ? args.alpha : known->alpha.value_or(-1);
  if (alpha >= 0) {
    json steps = json::array();
    std::optional<Index> stop_after;
    for (Index k = std::max<Index>(plan.s - 1, 0); k < n; ++k) {
      const double further = 1.0 - prob_no_further(profile, k);
      steps.push_back({{"k", k}, {"further_success_prob", further}});
      if (!stop_after && further < alpha) stop_after = k;
    }
    out["threshold"] = {{"alpha", alpha},
                        {"steps", steps},
                        {"stop_after", stop_after ? json(*stop_after) : json(nullptr)}};
  }
  if (args.best_order) {
    const auto best = best_order(profile, args.max_exhaustive);
    std::vector<Index> patients;
    for (auto i : best.order) patients.push_back(i + 1);
    out["best_order"] = {{"order", patients}, {"plan", plan_json(best.plan)}};
  }

  if (args.json) {
    std::cout << out.dump(2) << '\n';
    return 0;
  }

  auto row = [](const char* label, const Column<double>& values, Index shown) {
    std::cout << std::left << std::setw(7) << label;
    for (Index i = 0; i < shown; ++i) std::cout << std::setw(6) << tableau_number(values[i]);
    if (shown < values.size()) std::cout << "...";
    std::cout << '\n';
  };
  std::cout << "Reversed order, patients " << n << " down to 1\n";
  row("(i)", p_rev, n);
  row("(ii)", q_rev, n);
  row("(iii)", r_rev, n - plan.s + 1);
  std::cout << std::fixed << std::setprecision(6);
  std::cout << "s=" << plan.s << ", R=" << plan.R << ", Q=" << plan.Q << ", V=" << plan.V << '\n';
  if (plan.s > 1) {
    std::cout << "Treat patients 1.." << plan.s - 1 << " in any case; from patient " << plan.s
              << " on, stop after the first success.\n";
  } else {
    std::cout << "Stop after the first success.\n";
  }
  std::cout << "V(" << n << ",s):";
  for (Index s = 0; s < n; ++s) std::cout << ' ' << curve[s];
  std::cout << '\n';
  if (out.contains("threshold")) {
    const auto& th = out["threshold"];
    std::cout << "Lower threshold alpha=" << alpha << ": ";
    if (th["stop_after"].is_null()) {
      std::cout << "never reached\n";
    } else {
      std::cout << "stop after patient " << th["stop_after"].get<Index>()
                << " if still running\n";
    }
  }
  if (out.contains("best_order")) {
    const auto& best = out["best_order"];
    std::cout << "Best order:";
    for (const auto& i : best["order"]) std::cout << ' ' << i.get<Index>();
    std::cout << "  s=" << best["plan"]["s"].get<Index>()
              << ", V=" << best["plan"]["V"].get<double>() << '\n';
  }
  return 0;
}

struct SimulateArgs {
  std::string instance;
  std::string probs;
  std::string scenario;
  std::uint64_t seed = 0;
  std::uint64_t reps = 100000;
  unsigned threads = 0;
  bool json = false;
  std::string csv;
  std::string sweep;
  double true_p = -1;
  double h = -1;
};

void print_report(const sim::SimReport& r) {
  std::cout << std::fixed << std::setprecision(6);
  std::cout << "scenario      " << r.scenario << '\n'
            << "replications  " << r.replications << " (seed " << r.seed << ")\n"
            << "win rate      " << r.win_rate << " +/- " << r.ci_halfwidth << " (99%)\n"
            << "benchmark     " << r.benchmark << '\n'
            << "mean treated  " << r.mean_treated << '\n'
            << "mean futile   " << r.mean_futile << '\n'
            << "mean missed   " << r.mean_missed << '\n'
            << "no success    " << r.no_success << '\n'
            << "prophet       win " << r.prophet.win_rate << ", treated "
            << r.prophet.mean_treated << '\n'
            << "half-prophet  win " << r.half_prophet.win_rate << ", treated "
            << r.half_prophet.mean_treated << '\n';
}

int cmd_simulate(const SimulateArgs& args) {
  sim::SimConfig config;
  config.seed = args.seed;
  config.replications = args.reps;
  config.threads = args.threads;
  config.keep_replications = !args.csv.empty();

  std::optional<Instance> instance;
  if (!args.instance.empty() || !args.probs.empty()) {
    instance = load_instance(args.instance, args.probs);
  }
  std::string scenario = args.scenario;
  if (scenario.empty()) {
    if (!instance) throw ValidationError("", "give --instance, --probs or --scenario");
    scenario = instance->protocol == Protocol::P1   ? "known"
               : instance->protocol == Protocol::P4 ? "horizon"
                                                    : "adaptive";
  }
  const double true_p = args.true_p > 0 ? args.true_p
                        : instance && instance->true_p ? *instance->true_p
                                                       : -1.0;

  if (scenario == "adaptive" && !args.sweep.empty()) {
    double h = args.h;
    if (h <= 0 && instance) {
      if (const auto* a = std::get_if<AdaptiveInstance>(&instance->body)) h = a->scores.h()[0];
    }
    if (h <= 0) throw ValidationError("/h", "sweep needs an equal health score (--h)");
    if (true_p <= 0) throw ValidationError("/true_p", "adaptive simulation needs --true-p");
    json rows = json::array();
    if (!args.json) std::cout << "     n   benchmark    win_rate   ci99        gap\n";
    for (double nd : parse_list(args.sweep)) {
      const auto n = static_cast<Index>(nd);
      const auto report = sim::simulate_adaptive(
          true_p, HealthScores<double>(Column<double>::Constant(n, h)), config);
      const double gap = report.benchmark - report.win_rate;
      rows.push_back({{"n", n}, {"benchmark", report.benchmark}, {"win_rate", report.win_rate},
                      {"ci99_halfwidth", report.ci_halfwidth}, {"gap", gap}});
      if (!args.json) {
        std::printf("%6ld   %.6f    %.6f   %.6f    %.6f\n", static_cast<long>(n),
                    report.benchmark, report.win_rate, report.ci_halfwidth, gap);
      }
    }
    if (args.json) std::cout << rows.dump(2) << '\n';
    return 0;
  }

  sim::SimReport report;
  if (scenario == "known") {
    if (!instance) throw ValidationError("/probs", "known-odds simulation needs probabilities");
    const auto& profile = std::get<KnownOddsInstance>(instance->body).profile;
    report = sim::simulate_known(profile, stop_index(profile), config);
  } else if (scenario == "adaptive") {
    const auto* a = instance ? std::get_if<AdaptiveInstance>(&instance->body) : nullptr;
    if (a == nullptr) throw ValidationError("/h", "adaptive simulation needs a P2/P3 instance");
    if (true_p <= 0) throw ValidationError("/true_p", "adaptive simulation needs --true-p");
    report = sim::simulate_adaptive(true_p, a->scores, config);
  } else if (scenario == "horizon") {
    const auto* hz = instance ? std::get_if<HorizonInstance>(&instance->body) : nullptr;
    if (hz == nullptr) throw ValidationError("/horizon", "horizon simulation needs a P4 instance");
    if (true_p <= 0) throw ValidationError("/true_p", "horizon simulation needs --true-p");
    report = sim::simulate_horizon(hz->model, true_p, instance->health, config);
  } else {
    throw ValidationError("/scenario", "scenario must be known, adaptive or horizon");
  }

  if (!args.csv.empty()) {
    std::ofstream csv(args.csv);
    if (!csv) throw std::runtime_error("cannot write " + args.csv);
    sim::write_csv(csv, report);
  }
  if (args.json) {
    std::cout << sim::to_json(report).dump(2) << '\n';
  } else {
    print_report(report);
  }
  return 0;
}

int cmd_replay(const std::string& log, bool pretty) {
  const auto events = EventLog::read(log);
  const Session session = Session::replay(events);
  std::cout << (pretty ? session.snapshot().dump(2) : session.snapshot().dump()) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"oddstop: stop on the last success"};
  app.require_subcommand(1);

  PlanArgs plan_args;
  auto* plan = app.add_subcommand("plan", "Stopping index, tableau and value curve for known odds");
  plan->add_option("--instance", plan_args.instance, "Instance JSON file")->check(CLI::ExistingFile);
  plan->add_option("--probs", plan_args.probs, "Comma-separated success probabilities");
  plan->add_flag("--json", plan_args.json, "Machine-readable output");
  plan->add_flag("--best-order", plan_args.best_order, "Search all treatment orders");
  plan->add_option("--max-exhaustive", plan_args.max_exhaustive, "Largest n for --best-order");
  plan->add_option("--alpha", plan_args.alpha, "Lower threshold on a further success")
      ->check(CLI::Range(0.0, 1.0));

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo evaluation of a stopping rule");
  simulate->add_option("--instance", sim_args.instance, "Instance JSON file")
      ->check(CLI::ExistingFile);
  simulate->add_option("--probs", sim_args.probs, "Comma-separated success probabilities");
  simulate->add_option("--scenario", sim_args.scenario, "known | adaptive | horizon")
      ->check(CLI::IsMember({"known", "adaptive", "horizon"}));
  simulate->add_option("--seed", sim_args.seed, "RNG seed")->required();
  simulate->add_option("--reps", sim_args.reps, "Replications")->check(CLI::PositiveNumber);
  simulate->add_option("--threads", sim_args.threads, "Worker threads (0: all cores)");
  simulate->add_flag("--json", sim_args.json, "Machine-readable output");
  simulate->add_option("--csv", sim_args.csv, "Write per-replication outcomes to this CSV file");
  simulate->add_option("--sweep", sim_args.sweep, "Adaptive: comma-separated n values");
  simulate->add_option("--true-p", sim_args.true_p, "True internal success probability");
  simulate->add_option("--health", sim_args.h, "Equal health score for --sweep");

  ServiceOptions serve_opts;
  std::string data_dir;
  auto* serve = app.add_subcommand("serve", "Run the session service");
  serve->add_option("--bind", serve_opts.bind, "Bind address")->envname("ODDSTOP_BIND");
  serve->add_option("--port", serve_opts.port, "Port")->envname("ODDSTOP_PORT");
  serve->add_option("--data-dir", data_dir, "Event log directory")->envname("ODDSTOP_DATA_DIR");
  serve->add_option("--token", serve_opts.token, "Static bearer token")->envname("ODDSTOP_TOKEN");
  serve->add_option("--cors-origin", serve_opts.cors_origin, "Allowed browser origin")
      ->envname("ODDSTOP_CORS_ORIGIN");

  std::string log_file;
  bool pretty = false;
  auto* replay = app.add_subcommand("replay", "Rebuild a session from its event log");
  replay->add_option("log", log_file, "Session .jsonl event log")
      ->required()
      ->check(CLI::ExistingFile);
  replay->add_flag("--pretty", pretty, "Indent the JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*plan) return cmd_plan(plan_args);
    if (*simulate) return cmd_simulate(sim_args);
    if (*serve) {
      if (!data_dir.empty()) serve_opts.data_dir = data_dir;
      return run_service(serve_opts);
    }
    if (*replay) return cmd_replay(log_file, pretty);
  } catch (const ValidationError& e) {
    std::cerr << "invalid input at " << (e.path().empty() ? "/" : e.path()) << ": " << e.what()
              << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
