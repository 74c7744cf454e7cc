// ztseg command line: replay an event log, simulate a scenario end to end,
// score an audit log against ground truth, or fold analyst verdicts into the
// thresholds of a config file.
//
// Exit codes: 0 success, 1 validation/config/usage error, 2 numerical error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "ztseg/engine.hpp"
#include "ztseg/errors.hpp"
#include "ztseg/simharness.hpp"

namespace fs = std::filesystem;
using namespace ztseg;

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  return out;
}

EngineConfig config_or_default(const std::string& path) {
  return path.empty() ? EngineConfig{} : load_config(path);
}

int run_replay(const std::string& events_path, const std::string& config_path,
               const std::string& audit_path, const std::string& baselines_path,
               const std::string& graph_path) {
  Engine engine(config_or_default(config_path));
  auto in = open_in(events_path);
  const auto result = replay(engine, in);
  auto out = open_out(audit_path);
  write_audit_log(out, result.audit);
  if (!baselines_path.empty()) {
    auto b = open_out(baselines_path);
    engine.write_baselines(b);
  }
  if (!graph_path.empty()) {
    auto g = open_out(graph_path);
    g << engine.graph().snapshot(engine.config().salt).dump(2) << '\n';
  }
  std::cerr << "replayed " << result.audit.size() << " events, " << result.containments.size()
            << " quarantines\n";
  return 0;
}

int run_simulate(const std::string& scenario_path, std::optional<std::uint64_t> seed,
                 const std::string& out_dir, const std::string& config_path) {
  nlohmann::json spec_json = nlohmann::json::object();
  if (!scenario_path.empty()) {
    auto in = open_in(scenario_path);
    try {
      spec_json = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& err) {
      throw ValidationError(std::string("malformed scenario: ") + err.what());
    }
  }
  ScenarioSpec spec = scenario_from_json(spec_json);
  if (seed) spec.seed = *seed;

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  const Scenario scenario = generate_scenario(spec);
  const EngineConfig config = scenario_engine_config(spec, config_or_default(config_path));
  {
    auto out = open_out((dir / "events.jsonl").string());
    write_event_log(out, scenario.events);
  }
  const GroundTruth truth = scenario.truth.pseudonymized(config.salt);
  {
    auto out = open_out((dir / "truth.jsonl").string());
    write_truth(out, truth);
  }

  Engine engine(config);
  const auto dyn = replay(engine, scenario.events);
  StaticEngine static_engine(config);
  const auto stat = replay_static(static_engine, scenario.events);
  {
    auto out = open_out((dir / "audit_dynamic.jsonl").string());
    write_audit_log(out, dyn.audit);
  }
  {
    auto out = open_out((dir / "audit_static.jsonl").string());
    write_audit_log(out, stat.audit);
  }
  {
    auto out = open_out((dir / "engine_config.json").string());
    out << config_to_json(config).dump(2) << '\n';
  }
  {
    auto out = open_out((dir / "graph.json").string());
    out << engine.graph().snapshot(config.salt).dump(2) << '\n';
  }

  auto timed = [&](Metrics m, const ReplayResult& r) {
    const double n = static_cast<double>(r.audit.size());
    if (r.elapsed_seconds > 0.0) m.throughput_eps = n / r.elapsed_seconds;
    if (n > 0.0) m.mean_latency_us = 1e6 * r.elapsed_seconds / n;
    return m;
  };
  const auto report =
      compare(timed(evaluate(dyn.audit, truth), dyn), timed(evaluate(stat.audit, truth), stat));
  auto json = report_to_json(report);
  std::vector<std::string> compromised;
  for (const auto& [id, t] : scenario.truth.identities) {
    if (t.compromised) compromised.push_back(id);
  }
  json["shared_resource_exposure"] = shared_resource_exposure(engine.graph(), compromised);
  json["events"] = scenario.events.size();
  {
    auto out = open_out((dir / "report.json").string());
    out << json.dump(2) << '\n';
  }
  const auto text = render_text(report);
  {
    auto out = open_out((dir / "report.txt").string());
    out << text;
  }
  std::cout << text;
  return 0;
}

int run_report(const std::string& audit_path, const std::string& truth_path,
               const std::string& static_path) {
  auto audit_in = open_in(audit_path);
  const auto audit = read_audit_log(audit_in);
  auto truth_in = open_in(truth_path);
  const auto truth = read_truth(truth_in);
  const Metrics dyn = evaluate(audit, truth);
  if (static_path.empty()) {
    const auto report = compare(dyn, dyn);
    std::cout << report_to_json(report).at("dynamic").dump(2) << '\n';
    return 0;
  }
  auto static_in = open_in(static_path);
  const Metrics stat = evaluate(read_audit_log(static_in), truth);
  const auto report = compare(dyn, stat);
  std::cout << render_text(report) << report_to_json(report).dump(2) << '\n';
  return 0;
}

int run_feedback(const std::string& audit_path, const std::string& verdicts_path,
                 const std::string& config_path, const std::string& config_out) {
  EngineConfig config = config_or_default(config_path);
  auto audit_in = open_in(audit_path);
  std::map<std::string, Tier> tiers;
  for (const auto& r : read_audit_log(audit_in)) tiers[r.event_id] = r.tier;
  auto verdict_in = open_in(verdicts_path);
  for (const auto& v : read_verdicts(verdict_in)) {
    Tier tier = Tier::Allow;
    if (v.judgment != Judgment::MissedThreat) {
      const auto it = tiers.find(v.event_id);
      if (it == tiers.end()) throw ReferenceError("verdict references unknown event \"" + v.event_id + "\"");
      tier = it->second;
    }
    config.thresholds = adjust_thresholds(config.thresholds, v.judgment, tier, config.feedback_rate);
  }
  save_config(config, config_out);
  std::cout << config_to_json(config)["thresholds"].dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Identity-based threat segmentation engine"};
  app.require_subcommand(1);

  std::string events, config, audit_out, baselines_out, graph_out;
  auto* replay_cmd = app.add_subcommand("replay", "Score an event log with the dynamic engine");
  replay_cmd->add_option("--events", events, "Event log (JSON Lines)")->required();
  replay_cmd->add_option("--config", config, "Engine config (JSON)");
  replay_cmd->add_option("--audit-out", audit_out, "Audit log to write")->required();
  replay_cmd->add_option("--baselines-out", baselines_out, "Baseline store to write");
  replay_cmd->add_option("--graph-out", graph_out, "Access graph snapshot to write");

  std::string scenario, out_dir, sim_config;
  std::optional<std::uint64_t> seed;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a scenario and compare both engines on it");
  sim_cmd->add_option("--scenario", scenario, "Scenario spec (JSON); defaults when omitted");
  sim_cmd->add_option("--seed", seed, "Overrides the scenario seed");
  sim_cmd->add_option("--out-dir", out_dir, "Output directory")->required();
  sim_cmd->add_option("--config", sim_config, "Engine config (JSON)");

  std::string audit, truth, static_audit;
  auto* report_cmd = app.add_subcommand("report", "Compute detection metrics for an audit log");
  report_cmd->add_option("--audit", audit, "Audit log")->required();
  report_cmd->add_option("--truth", truth, "Ground truth (JSON Lines)")->required();
  report_cmd->add_option("--static-audit", static_audit, "Static-engine audit log to compare against");

  std::string fb_audit, verdicts, fb_config, config_out;
  auto* fb_cmd = app.add_subcommand("feedback", "Apply analyst verdicts to the thresholds");
  fb_cmd->add_option("--audit", fb_audit, "Audit log the verdicts refer to")->required();
  fb_cmd->add_option("--verdicts", verdicts, "Verdicts (JSON Lines)")->required();
  fb_cmd->add_option("--config", fb_config, "Config to start from");
  fb_cmd->add_option("--config-out", config_out, "Updated config to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*replay_cmd) return run_replay(events, config, audit_out, baselines_out, graph_out);
    if (*sim_cmd) return run_simulate(scenario, seed, out_dir, sim_config);
    if (*report_cmd) return run_report(audit, truth, static_audit);
    if (*fb_cmd) return run_feedback(fb_audit, verdicts, fb_config, config_out);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
