#include "ztseg/engine.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ztseg/errors.hpp"

namespace ztseg {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::string_view kDynamicLabel = "dynamic";
constexpr std::string_view kStaticLabel = "static";

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key \"") + key + "\" has the wrong type");
  }
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> known,
                    std::string_view where) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || item.key() == k;
    if (!ok) {
      throw ConfigError("unknown config key \"" + item.key() + "\" in " + std::string(where));
    }
  }
}

void add_reason(std::vector<std::string>& reasons, std::string_view code) {
  for (const auto& r : reasons) {
    if (r == code) return;
  }
  reasons.emplace_back(code);
}

}  // namespace

void EngineConfig::validate() const {
  const double sum = weights.anomaly + weights.context + weights.peer;
  if (!(weights.anomaly >= 0 && weights.context >= 0 && weights.peer >= 0) ||
      std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("risk weights must be non-negative and sum to 1");
  }
  thresholds.validate();
  context.validate();
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(feedback_rate > 0.0 && feedback_rate < 1.0)) {
    throw ConfigError("feedback rate must lie in (0, 1)");
  }
  if (!(max_speed_kmh > 0.0) || !(min_distance_km >= 0.0)) {
    throw ConfigError("travel limits must be positive");
  }
  if (salt.empty()) throw ConfigError("salt must not be empty");
  if (peer_k < 1) throw ConfigError("peer k must be at least 1");
}

EngineConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"weights", "thresholds", "business_hours", "context_factor_weights",
                  "familiar_radius_km", "blocklist", "blocked_regions", "warmup_threshold",
                  "epsilon", "feedback_rate", "max_speed_kmh", "min_distance_km", "salt", "peer"},
                 "config");
  EngineConfig c;
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    reject_unknown(w, {"w1", "w2", "peer"}, "weights");
    read_if(w, "w1", c.weights.anomaly);
    read_if(w, "w2", c.weights.context);
    read_if(w, "peer", c.weights.peer);
  }
  if (j.contains("thresholds")) {
    const auto& t = j.at("thresholds");
    reject_unknown(t, {"step_up", "restrict", "quarantine"}, "thresholds");
    read_if(t, "step_up", c.thresholds.step_up);
    read_if(t, "restrict", c.thresholds.restrict);
    read_if(t, "quarantine", c.thresholds.quarantine);
  }
  if (j.contains("business_hours")) {
    std::vector<int> hours;
    read_if(j, "business_hours", hours);
    if (hours.size() != 2) throw ConfigError("business_hours must be [start, end]");
    c.context.business_start_hour = hours[0];
    c.context.business_end_hour = hours[1];
  }
  if (j.contains("context_factor_weights")) {
    const auto& v = j.at("context_factor_weights");
    reject_unknown(v, {"unknown_device", "unfamiliar_location", "off_hours", "untrusted_ip"},
                   "context_factor_weights");
    read_if(v, "unknown_device", c.context.weights.unknown_device);
    read_if(v, "unfamiliar_location", c.context.weights.unfamiliar_location);
    read_if(v, "off_hours", c.context.weights.off_hours);
    read_if(v, "untrusted_ip", c.context.weights.untrusted_ip);
  }
  read_if(j, "familiar_radius_km", c.context.familiar_radius_km);
  if (j.contains("blocklist")) {
    std::vector<std::string> prefixes;
    read_if(j, "blocklist", prefixes);
    for (const auto& p : prefixes) c.context.blocklist.push_back(Ipv4Prefix::parse(p));
  }
  if (j.contains("blocked_regions")) {
    if (!j.at("blocked_regions").is_array()) throw ConfigError("blocked_regions must be a list");
    for (const auto& box : j.at("blocked_regions")) {
      reject_unknown(box, {"min_lat", "max_lat", "min_lon", "max_lon"}, "blocked_regions");
      GeoBox b;
      read_if(box, "min_lat", b.min_lat);
      read_if(box, "max_lat", b.max_lat);
      read_if(box, "min_lon", b.min_lon);
      read_if(box, "max_lon", b.max_lon);
      c.context.blocked_regions.push_back(b);
    }
  }
  read_if(j, "warmup_threshold", c.warmup_threshold);
  read_if(j, "epsilon", c.epsilon);
  read_if(j, "feedback_rate", c.feedback_rate);
  read_if(j, "max_speed_kmh", c.max_speed_kmh);
  read_if(j, "min_distance_km", c.min_distance_km);
  read_if(j, "salt", c.salt);
  if (j.contains("peer")) {
    const auto& p = j.at("peer");
    reject_unknown(p, {"k", "seed"}, "peer");
    read_if(p, "k", c.peer_k);
    read_if(p, "seed", c.peer_seed);
  }
  c.validate();
  return c;
}

nlohmann::ordered_json config_to_json(const EngineConfig& c) {
  ojson j;
  j["weights"] = {{"w1", c.weights.anomaly}, {"w2", c.weights.context}, {"peer", c.weights.peer}};
  j["thresholds"] = {{"step_up", c.thresholds.step_up},
                     {"restrict", c.thresholds.restrict},
                     {"quarantine", c.thresholds.quarantine}};
  j["business_hours"] = {c.context.business_start_hour, c.context.business_end_hour};
  j["context_factor_weights"] = {{"unknown_device", c.context.weights.unknown_device},
                                 {"unfamiliar_location", c.context.weights.unfamiliar_location},
                                 {"off_hours", c.context.weights.off_hours},
                                 {"untrusted_ip", c.context.weights.untrusted_ip}};
  j["familiar_radius_km"] = c.context.familiar_radius_km;
  j["blocklist"] = ojson::array();
  for (const auto& p : c.context.blocklist) j["blocklist"].push_back(p.to_string());
  j["blocked_regions"] = ojson::array();
  for (const auto& b : c.context.blocked_regions) {
    j["blocked_regions"].push_back(
        {{"min_lat", b.min_lat}, {"max_lat", b.max_lat}, {"min_lon", b.min_lon}, {"max_lon", b.max_lon}});
  }
  j["warmup_threshold"] = c.warmup_threshold;
  j["epsilon"] = c.epsilon;
  j["feedback_rate"] = c.feedback_rate;
  j["max_speed_kmh"] = c.max_speed_kmh;
  j["min_distance_km"] = c.min_distance_km;
  j["salt"] = c.salt;
  j["peer"] = {{"k", c.peer_k}, {"seed", c.peer_seed}};
  return j;
}

EngineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& err) {
    throw ConfigError("malformed config " + path + ": " + err.what());
  }
  return config_from_json(j);
}

void save_config(const EngineConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file " + path);
  out << config_to_json(config).dump(2) << '\n';
}

// --- audit records ---------------------------------------------------------

std::string serialize_audit(const AuditRecord& r) {
  ojson j;
  j["event_id"] = r.event_id;
  j["identity"] = r.identity;
  j["timestamp"] = r.timestamp;
  j["A"] = r.anomaly;
  j["C"] = r.context;
  j["R"] = r.risk;
  j["w1"] = r.w1;
  j["w2"] = r.w2;
  if (r.peer) j["P"] = *r.peer;
  if (r.w_peer) j["w3"] = *r.w_peer;
  j["tier"] = to_string(r.tier);
  j["reasons"] = r.reasons;
  j["engine"] = r.engine;
  return j.dump();
}

AuditRecord parse_audit(const std::string& line) {
  AuditRecord r;
  try {
    const auto j = nlohmann::json::parse(line);
    r.event_id = j.at("event_id").get<std::string>();
    r.identity = j.at("identity").get<std::string>();
    r.timestamp = j.at("timestamp").get<Timestamp>();
    r.anomaly = j.at("A").get<double>();
    r.context = j.at("C").get<double>();
    r.risk = j.at("R").get<double>();
    r.w1 = j.at("w1").get<double>();
    r.w2 = j.at("w2").get<double>();
    if (j.contains("P")) r.peer = j.at("P").get<double>();
    if (j.contains("w3")) r.w_peer = j.at("w3").get<double>();
    const auto tier = parse_tier(j.at("tier").get<std::string>());
    if (!tier) throw ValidationError("unknown tier");
    r.tier = *tier;
    r.reasons = j.at("reasons").get<std::vector<std::string>>();
    r.engine = j.at("engine").get<std::string>();
  } catch (const nlohmann::json::exception& err) {
    throw ValidationError(std::string("bad audit record: ") + err.what());
  }
  return r;
}

void write_audit_log(std::ostream& out, const std::vector<AuditRecord>& records) {
  for (const auto& r : records) out << serialize_audit(r) << '\n';
}

std::vector<AuditRecord> read_audit_log(std::istream& in) {
  std::vector<AuditRecord> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_audit(text));
    } catch (const ValidationError& err) {
      throw ParseError(line, err.what());
    }
  }
  return out;
}

std::string_view to_string(Judgment judgment) {
  switch (judgment) {
    case Judgment::FalsePositive: return "FalsePositive";
    case Judgment::TruePositive: return "TruePositive";
    case Judgment::MissedThreat: return "MissedThreat";
  }
  return "TruePositive";
}

std::optional<Judgment> parse_judgment(std::string_view text) {
  for (Judgment j : {Judgment::FalsePositive, Judgment::TruePositive, Judgment::MissedThreat}) {
    if (to_string(j) == text) return j;
  }
  return std::nullopt;
}

std::vector<Verdict> read_verdicts(std::istream& in) {
  std::vector<Verdict> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(text);
      const auto judgment = parse_judgment(j.at("verdict").get<std::string>());
      if (!judgment) throw ParseError(line, "unknown verdict");
      out.push_back({j.at("event_id").get<std::string>(), *judgment});
    } catch (const nlohmann::json::exception& err) {
      throw ParseError(line, err.what());
    }
  }
  return out;
}

// --- feedback --------------------------------------------------------------

Thresholds adjust_thresholds(const Thresholds& current, Judgment judgment, Tier tier,
                             double rate) {
  double t[3] = {current.step_up, current.restrict, current.quarantine};
  const double cap[3] = {kQuarantineCap - 2 * kThresholdGap, kQuarantineCap - kThresholdGap,
                         kQuarantineCap};

  switch (judgment) {
    case Judgment::TruePositive:
      return current;
    case Judgment::FalsePositive: {
      if (tier == Tier::Allow) return current;
      const int i = static_cast<int>(tier) - 1;
      t[i] = std::min(t[i] * (1.0 + rate), cap[i]);
      for (int j = i + 1; j < 3; ++j) t[j] = std::max(t[j], t[j - 1] + kThresholdGap);
      break;
    }
    case Judgment::MissedThreat: {
      double factor = 1.0 - rate;
      // Proportional rescale: never push step-up through the floor.
      if (t[0] * factor < kThresholdFloor) factor = kThresholdFloor / t[0];
      for (double& x : t) x *= factor;
      break;
    }
  }

  // Floor pass upward, then cap pass downward; together they leave
  // floor <= t0 < t1 < t2 <= cap with gaps of at least kThresholdGap.
  t[0] = std::max(t[0], kThresholdFloor);
  t[1] = std::max(t[1], t[0] + kThresholdGap);
  t[2] = std::max(t[2], t[1] + kThresholdGap);
  t[2] = std::min(t[2], kQuarantineCap);
  t[1] = std::min(t[1], t[2] - kThresholdGap);
  t[0] = std::min(t[0], t[1] - kThresholdGap);
  return {t[0], t[1], t[2]};
}

// --- dynamic engine --------------------------------------------------------

Engine::Engine(EngineConfig config) : config_(std::move(config)) { config_.validate(); }

std::optional<Tier> Engine::tier_of(const std::string& event_id) const {
  const auto it = decisions_.find(event_id);
  if (it == decisions_.end()) return std::nullopt;
  return it->second;
}

ProcessResult Engine::process_event(const AccessEvent& event) {
  const auto check = validate_event(event);
  if (!check.ok()) throw ValidationError("invalid event \"" + event.event_id + "\": " + check.violations.front());

  auto [state_it, new_identity] = identities_.try_emplace(event.identity_id);
  IdentityState& state = state_it->second;
  if (new_identity) state.identity_id = event.identity_id;
  if (state.last_timestamp && event.timestamp < *state.last_timestamp) {
    throw OrderingError(event.event_id, "event \"" + event.event_id + "\" is older than the last event of its identity");
  }
  auto [baseline_it, new_baseline] =
      baselines_.try_emplace(event.identity_id, event.identity_id, config_.epsilon);
  BehaviorBaseline& baseline = baseline_it->second;

  ProcessResult result;

  // (1) impossible travel against the most recent prior login
  if (event.action == Action::Login) {
    result.travel = detect_impossible_travel(state, event, config_.max_speed_kmh,
                                             config_.min_distance_km);
  }

  // (2)-(3) behavioral anomaly against the pre-update baseline
  const FeatureVector fv = extract_features(event, state);
  const double distance = mahalanobis_distance(fv, baseline);
  const AnomalyScore anomaly = anomaly_score(distance, baseline, config_.warmup_threshold);

  // (4) context
  const ContextScore context = contextual_score(event, state, config_.context);

  // (5) aggregate risk
  RiskAssessment& ra = result.assessment;
  ra.anomaly = anomaly.score;
  ra.context = context.value;
  ra.w1 = config_.weights.anomaly;
  ra.w2 = config_.weights.context;
  ra.factors = {{"anomaly", ra.anomaly, ra.w1}, {"context", ra.context, ra.w2}};
  std::optional<double> peer;
  if (config_.weights.peer > 0.0) {
    peer = (peer_model_ && !anomaly.warmup) ? peer_deviation(baseline.mean(), *peer_model_) : 0.0;
    ra.factors.push_back({"peer", *peer, config_.weights.peer});
    ra.risk = aggregate_risk(ra.factors);
  } else {
    ra.risk = risk_score(ra.anomaly, ra.context, ra.w1, ra.w2);
  }

  // (6) tiered decision; impossible travel forces at least Restrict
  Decision decision = decide(ra.risk, config_.thresholds, state.quarantined);
  if (result.travel.flagged) {
    if (decision.tier < Tier::Restrict) decision.tier = Tier::Restrict;
    add_reason(decision.reasons, reason::kImpossibleTravel);
  }
  if (decision.tier != Tier::Allow) {
    for (const auto& code : context.reason_codes()) add_reason(decision.reasons, code);
    if (anomaly.warmup) add_reason(decision.reasons, reason::kBehaviorWarmup);
  }

  // (7) containment
  if (decision.tier == Tier::Quarantine && !state.quarantined) {
    auto record = graph_.quarantine(event.identity_id, event.timestamp);
    state.quarantined = true;
    containments_.push_back(record);
    result.containment = std::move(record);
  }

  // (8) learn from the event
  if (event.success) {
    baseline.update(fv);
    graph_.record_access(event);
  }
  state.observe(event);

  // (9) audit
  AuditRecord& audit = result.audit;
  audit.event_id = event.event_id;
  audit.identity = pseudonymize(event.identity_id, config_.salt).token;
  audit.timestamp = event.timestamp;
  audit.anomaly = ra.anomaly;
  audit.context = ra.context;
  audit.risk = ra.risk;
  audit.w1 = ra.w1;
  audit.w2 = ra.w2;
  if (peer) {
    audit.peer = peer;
    audit.w_peer = config_.weights.peer;
  }
  audit.tier = decision.tier;
  audit.reasons = decision.reasons;
  audit.engine = kDynamicLabel;

  decisions_[event.event_id] = decision.tier;
  result.decision = std::move(decision);
  return result;
}

void Engine::apply_feedback(const Verdict& verdict) {
  Tier tier = Tier::Allow;
  if (verdict.judgment != Judgment::MissedThreat) {
    const auto known = tier_of(verdict.event_id);
    if (!known) throw ReferenceError("verdict references unknown event \"" + verdict.event_id + "\"");
    tier = *known;
  }
  config_.thresholds =
      adjust_thresholds(config_.thresholds, verdict.judgment, tier, config_.feedback_rate);
}

void Engine::release(const std::string& identity_id) {
  graph_.release(identity_id);
  identities_.at(identity_id).quarantined = false;
}

void Engine::refresh_peer_model() {
  std::map<std::string, BehaviorBaseline> ready;
  for (const auto& [id, b] : baselines_) {
    if (b.n() >= config_.warmup_threshold) ready.emplace(id, b);
  }
  if (static_cast<int>(ready.size()) < config_.peer_k) return;
  peer_model_ = cluster_identities(ready, config_.peer_k, config_.peer_seed);
}

void Engine::write_baselines(std::ostream& out) const {
  for (const auto& [id, b] : baselines_) {
    ojson j;
    j["identity"] = pseudonymize(id, config_.salt).token;
    j["n"] = b.n();
    j["mean"] = std::vector<double>(b.mean().data(), b.mean().data() + kFeatureDims);
    const Mat6 cov = b.covariance();
    std::vector<double> rows;
    for (int r = 0; r < kFeatureDims; ++r) {
      for (int c = 0; c < kFeatureDims; ++c) rows.push_back(cov(r, c));
    }
    j["covariance"] = rows;
    out << j.dump() << '\n';
  }
}

// --- static baseline -------------------------------------------------------

Decision static_decide(const AccessEvent& event, const IdentityState& state,
                       const ContextConfig& config) {
  Decision d;
  if (!state.knows_device(event.device_id)) d.reasons.emplace_back(reason::kUnknownDevice);
  if (!config.is_business_hour(event.timestamp)) d.reasons.emplace_back(reason::kOffHours);
  if (config.is_blocklisted(event.source_ip)) d.reasons.emplace_back(reason::kBlocklisted);
  d.tier = d.reasons.empty() ? Tier::Allow : Tier::Restrict;
  return d;
}

StaticEngine::StaticEngine(EngineConfig config) : config_(std::move(config)) {
  config_.validate();
}

std::pair<Decision, AuditRecord> StaticEngine::process_event(const AccessEvent& event) {
  auto [it, inserted] = identities_.try_emplace(event.identity_id);
  IdentityState& state = it->second;
  if (inserted) state.identity_id = event.identity_id;
  if (state.last_timestamp && event.timestamp < *state.last_timestamp) {
    throw OrderingError(event.event_id, "event \"" + event.event_id + "\" is older than the last event of its identity");
  }
  Decision d = static_decide(event, state, config_.context);

  // Only the device registry learns; nothing else about the identity is kept.
  ++state.event_count;
  state.last_timestamp = event.timestamp;
  if (event.success) {
    auto [dev, fresh] = state.known_devices.try_emplace(event.device_id);
    if (fresh) dev->second.first_seen = event.timestamp;
    dev->second.last_seen = event.timestamp;
    ++dev->second.count;
  }

  AuditRecord audit;
  audit.event_id = event.event_id;
  audit.identity = pseudonymize(event.identity_id, config_.salt).token;
  audit.timestamp = event.timestamp;
  audit.w1 = config_.weights.anomaly;
  audit.w2 = config_.weights.context;
  audit.tier = d.tier;
  audit.reasons = d.reasons;
  audit.engine = kStaticLabel;
  return {std::move(d), std::move(audit)};
}

// --- replay ----------------------------------------------------------------

ReplayResult replay(Engine& engine, const std::vector<AccessEvent>& events) {
  ReplayResult out;
  out.audit.reserve(events.size());
  out.decisions.reserve(events.size());
  const auto start = std::chrono::steady_clock::now();
  for (const auto& e : events) {
    auto r = engine.process_event(e);
    out.audit.push_back(std::move(r.audit));
    out.decisions.push_back(std::move(r.decision));
    if (r.containment) out.containments.push_back(std::move(*r.containment));
  }
  out.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

ReplayResult replay_static(StaticEngine& engine, const std::vector<AccessEvent>& events) {
  ReplayResult out;
  out.audit.reserve(events.size());
  out.decisions.reserve(events.size());
  const auto start = std::chrono::steady_clock::now();
  for (const auto& e : events) {
    auto [decision, audit] = engine.process_event(e);
    out.audit.push_back(std::move(audit));
    out.decisions.push_back(std::move(decision));
  }
  out.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

ReplayResult replay(Engine& engine, std::istream& event_log) {
  return replay(engine, parse_event_log(event_log));
}

}  // namespace ztseg
