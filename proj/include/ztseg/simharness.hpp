#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ztseg/engine.hpp"
#include "ztseg/events.hpp"

namespace ztseg {

struct RoleProfile {
  std::string name;
  std::vector<std::string> resources;  // at most 8, so benign bursts stay under 10 distinct
  GeoPoint home;
  int work_start_hour = 8;  // UTC, [start, end)
  int work_end_hour = 17;
  int min_devices = 1;
  int max_devices = 3;
};

enum class AttackKind { CredentialCompromise, InsiderOffHours, LateralMovement };

std::string_view to_string(AttackKind kind);
std::optional<AttackKind> parse_attack_kind(std::string_view text);

struct AttackMix {
  double credential_compromise = 1.0 / 3.0;
  double insider_off_hours = 1.0 / 3.0;
  double lateral_movement = 1.0 / 3.0;
};

struct ScenarioSpec {
  int n_benign = 200;
  int n_compromised = 10;
  int days = 30;
  double events_per_identity_per_day = 8.0;
  Timestamp start = 1699574400;  // Friday 2023-11-10 00:00 UTC
  std::vector<RoleProfile> roles = default_roles();
  AttackMix attack_mix;
  /// Threat-intel prefixes attacker infrastructure may come from; the
  /// simulate command adds them to the engine blocklist.
  std::vector<std::string> threat_intel = {"198.51.100.0/24"};
  /// Share of CredentialCompromise attacks sourced from threat-intel space.
  double known_bad_source_fraction = 0.5;
  std::uint64_t seed = 42;

  static std::vector<RoleProfile> default_roles();
  static std::vector<std::string> restricted_resources();

  void validate() const;  // throws ArgumentError
};

ScenarioSpec scenario_from_json(const nlohmann::json& j);
nlohmann::ordered_json scenario_to_json(const ScenarioSpec& spec);

struct IdentityTruth {
  bool compromised = false;
  Timestamp onset = 0;
  AttackKind kind = AttackKind::CredentialCompromise;
  std::set<std::string> malicious_events;
  std::size_t event_count = 0;
};

/// Labels keyed by identity (raw ids in memory, pseudonyms once persisted).
struct GroundTruth {
  std::map<std::string, IdentityTruth> identities;

  bool is_malicious(const std::string& event_id) const;
  GroundTruth pseudonymized(const std::string& salt) const;
};

void write_truth(std::ostream& out, const GroundTruth& truth);
GroundTruth read_truth(std::istream& in);

struct Scenario {
  std::vector<AccessEvent> events;  // global time order
  GroundTruth truth;
};

/// Seeded synthetic enterprise: benign daily sessions plus labeled attacks.
Scenario generate_scenario(const ScenarioSpec& spec);

/// Engine config for a scenario: `base` with the scenario's threat intel
/// added to the blocklist.
EngineConfig scenario_engine_config(const ScenarioSpec& spec, EngineConfig base = {});

struct Metrics {
  double recall = 0.0;
  double false_positive_rate = 0.0;
  std::optional<double> mean_containment;
  int contained = 0;
  int uncontained = 0;
  int compromised_total = 0;
  int benign_total = 0;
  double throughput_eps = 0.0;      // events per second
  double mean_latency_us = 0.0;     // per-event processing latency, response-time proxy

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Identity-level metrics. A compromised identity counts as detected when a
/// record at or after its onset reaches Restrict or above; a benign identity
/// is a false positive when any record does. Containment counts malicious
/// events up to and including the first one decided at Quarantine. Throws
/// CoverageError when a truth identity has no audit record.
Metrics evaluate(const std::vector<AuditRecord>& audit, const GroundTruth& truth);

struct ComparisonReport {
  Metrics dynamic;
  Metrics static_policy;
  double recall_delta = 0.0;
  double fpr_delta = 0.0;
  std::optional<double> containment_delta;
  double throughput_delta = 0.0;
  std::map<std::string, bool> flags;

  friend bool operator==(const ComparisonReport&, const ComparisonReport&) = default;
};

inline constexpr double kTargetRecall = 0.9;
inline constexpr double kTargetFpr = 0.05;
inline constexpr double kTargetContainment = 15.0;

ComparisonReport compare(const Metrics& dynamic, const Metrics& static_policy);
std::string render_text(const ComparisonReport& report);
nlohmann::ordered_json report_to_json(const ComparisonReport& report);
ComparisonReport report_from_json(const nlohmann::json& j);

/// Mean number of other identities reachable from each quarantined or
/// compromised identity through a shared resource over active edges.
double shared_resource_exposure(const AccessGraph& graph, const std::vector<std::string>& identities);

}  // namespace ztseg
