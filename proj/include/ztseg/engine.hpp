#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ztseg/behavior.hpp"
#include "ztseg/context_risk.hpp"
#include "ztseg/events.hpp"
#include "ztseg/peer_clustering.hpp"
#include "ztseg/segmentation.hpp"

namespace ztseg {

struct RiskWeights {
  double anomaly = 0.5;  // w1
  double context = 0.5;  // w2
  double peer = 0.0;     // optional third factor, off by default

  friend bool operator==(const RiskWeights&, const RiskWeights&) = default;
};

struct EngineConfig {
  RiskWeights weights;
  Thresholds thresholds;
  ContextConfig context;
  std::uint64_t warmup_threshold = kDefaultWarmupThreshold;
  double epsilon = BehaviorBaseline::kDefaultEpsilon;
  double feedback_rate = 0.05;
  double max_speed_kmh = kDefaultMaxSpeedKmh;
  double min_distance_km = kDefaultMinDistanceKm;
  std::string salt = "ztseg-default-salt";
  int peer_k = 4;
  std::uint64_t peer_seed = 7;

  void validate() const;  // throws ConfigError

  friend bool operator==(const EngineConfig&, const EngineConfig&) = default;
};

/// Missing keys keep their defaults; unknown keys are rejected.
EngineConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const EngineConfig& config);
EngineConfig load_config(const std::string& path);
void save_config(const EngineConfig& config, const std::string& path);

struct AuditRecord {
  std::string event_id;
  std::string identity;  // pseudonym token
  Timestamp timestamp = 0;
  double anomaly = 0.0;
  double context = 0.0;
  double risk = 0.0;
  double w1 = 0.5;
  double w2 = 0.5;
  std::optional<double> peer;     // present when the peer factor is weighted
  std::optional<double> w_peer;
  Tier tier = Tier::Allow;
  std::vector<std::string> reasons;
  std::string engine;  // "dynamic" | "static"

  friend bool operator==(const AuditRecord&, const AuditRecord&) = default;
};

std::string serialize_audit(const AuditRecord& record);
AuditRecord parse_audit(const std::string& line);  // throws ValidationError
void write_audit_log(std::ostream& out, const std::vector<AuditRecord>& records);
std::vector<AuditRecord> read_audit_log(std::istream& in);  // throws ParseError

enum class Judgment { FalsePositive, TruePositive, MissedThreat };

std::string_view to_string(Judgment judgment);
std::optional<Judgment> parse_judgment(std::string_view text);

struct Verdict {
  std::string event_id;
  Judgment judgment = Judgment::TruePositive;
};

std::vector<Verdict> read_verdicts(std::istream& in);  // JSON Lines {"event_id", "verdict"}

inline constexpr double kThresholdFloor = 0.05;
inline constexpr double kQuarantineCap = 0.985;  // keeps T_quarantine below 0.99
inline constexpr double kThresholdGap = 0.01;

/// Feedback rule on the tier thresholds. A false positive raises the
/// threshold that produced `tier` by (1 + rate); a missed threat lowers all
/// three by (1 - rate), scaling less when the step-up floor would be crossed.
/// Results are clamped to floor <= step_up, quarantine <= cap and adjacent
/// gaps >= kThresholdGap. True positives change nothing.
Thresholds adjust_thresholds(const Thresholds& current, Judgment judgment, Tier tier, double rate);

struct ProcessResult {
  Decision decision;
  RiskAssessment assessment;
  AuditRecord audit;
  TravelCheck travel;
  std::optional<ContainmentRecord> containment;
};

/// Dynamic engine: per-identity baselines, context scoring, tiered decisions
/// and quarantine on the access graph.
class Engine {
 public:
  explicit Engine(EngineConfig config = {});

  /// Scores one event against the state as it was before the event, then
  /// learns from it. Throws OrderingError if the identity's clock goes back.
  ProcessResult process_event(const AccessEvent& event);

  /// Records an analyst verdict. Throws ReferenceError for a FalsePositive or
  /// TruePositive that names an unknown event.
  void apply_feedback(const Verdict& verdict);

  /// Lifts a quarantine in both the graph and the identity state.
  void release(const std::string& identity_id);

  /// Re-clusters baseline means of identities past warmup. Needed before the
  /// peer factor contributes; a no-op when fewer identities than k qualify.
  void refresh_peer_model();

  const EngineConfig& config() const noexcept { return config_; }
  const Thresholds& thresholds() const noexcept { return config_.thresholds; }
  const AccessGraph& graph() const noexcept { return graph_; }
  const std::map<std::string, IdentityState>& identities() const noexcept { return identities_; }
  const std::map<std::string, BehaviorBaseline>& baselines() const noexcept { return baselines_; }
  const std::vector<ContainmentRecord>& containments() const noexcept { return containments_; }
  const std::optional<ClusterModel>& peer_model() const noexcept { return peer_model_; }
  std::optional<Tier> tier_of(const std::string& event_id) const;

  /// Baselines as JSON Lines keyed by pseudonymized identity.
  void write_baselines(std::ostream& out) const;

 private:
  EngineConfig config_;
  std::map<std::string, IdentityState> identities_;
  std::map<std::string, BehaviorBaseline> baselines_;
  AccessGraph graph_;
  std::map<std::string, Tier> decisions_;
  std::vector<ContainmentRecord> containments_;
  std::optional<ClusterModel> peer_model_;
};

/// Fixed-rule baseline: Allow iff the device is known, the hour is inside
/// business hours and the IP is not blocklisted; otherwise Restrict.
Decision static_decide(const AccessEvent& event, const IdentityState& state,
                       const ContextConfig& config);

/// Runs static_decide over a stream, learning nothing but device registrations.
class StaticEngine {
 public:
  explicit StaticEngine(EngineConfig config = {});

  std::pair<Decision, AuditRecord> process_event(const AccessEvent& event);

 private:
  EngineConfig config_;
  std::map<std::string, IdentityState> identities_;
};

struct ReplayResult {
  std::vector<AuditRecord> audit;
  std::vector<Decision> decisions;
  std::vector<ContainmentRecord> containments;
  double elapsed_seconds = 0.0;
};

/// Folds process_event over an event list.
ReplayResult replay(Engine& engine, const std::vector<AccessEvent>& events);
ReplayResult replay_static(StaticEngine& engine, const std::vector<AccessEvent>& events);
/// Parses then folds; the first parse or ordering error aborts the run.
ReplayResult replay(Engine& engine, std::istream& event_log);

}  // namespace ztseg
