#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "ztseg/engine.hpp"
#include "ztseg/errors.hpp"

using namespace ztseg;
using namespace ztseg::testing;

namespace {

bool has_reason(const Decision& d, std::string_view code) {
  return std::find(d.reasons.begin(), d.reasons.end(), code) != d.reasons.end();
}

EngineConfig with_blocklist() {
  EngineConfig cfg;
  cfg.context.blocklist.push_back(Ipv4Prefix::parse("203.0.113.0/24"));
  return cfg;
}

// 30 days of routine weekday-morning activity for u1, one event per day.
std::vector<AccessEvent> routine(const std::string& identity, int days) {
  std::vector<AccessEvent> out;
  for (int d = 0; d < days; ++d) {
    const Timestamp ts = monday(9 + d % 3, (d * 7) % 50) + static_cast<Timestamp>(d) * 86400;
    out.push_back(make_event(identity + "-e" + std::to_string(d), identity, ts,
                             d % 2 ? "r1" : "r2", Action::Read, kLondon, "d1", "10.0.0.1"));
  }
  return out;
}

}  // namespace

TEST_CASE("first event and blocklisted warmup event") {
  Engine engine(with_blocklist());
  const auto first = engine.process_event(make_event("e1", "u1", monday(10)));
  CHECK(first.assessment.anomaly == 0.5);
  CHECK(first.assessment.context == 0.0);
  CHECK(first.assessment.risk == doctest::Approx(0.25));
  CHECK(first.decision.tier == Tier::Allow);

  const auto blocked =
      engine.process_event(make_event("e2", "u1", monday(11), "r1", Action::Read, kLondon, "d1", "203.0.113.5"));
  CHECK(blocked.assessment.context == 1.0);
  CHECK(blocked.assessment.risk == doctest::Approx(0.75));
  CHECK(blocked.decision.tier == Tier::Restrict);
  CHECK(has_reason(blocked.decision, reason::kBlocklisted));
  CHECK(has_reason(blocked.decision, reason::kBehaviorWarmup));
}

TEST_CASE("impossible travel forces Restrict") {
  Engine engine;
  engine.process_event(make_event("e1", "u1", monday(9), "portal", Action::Login, kLondon));
  const auto r = engine.process_event(make_event("e2", "u1", monday(10), "portal", Action::Login, kNewYork));
  CHECK(r.travel.flagged);
  CHECK(r.decision.tier >= Tier::Restrict);
  CHECK(has_reason(r.decision, reason::kImpossibleTravel));
}

TEST_CASE("ordering and validation errors") {
  Engine engine;
  engine.process_event(make_event("e1", "u1", 500));
  CHECK_THROWS_AS(engine.process_event(make_event("e2", "u1", 400)), OrderingError);
  engine.process_event(make_event("e3", "u2", 400));
  auto bad = make_event("e4", "u1", 600);
  bad.geo.lat = 100;
  CHECK_THROWS_AS(engine.process_event(bad), ValidationError);
}

TEST_CASE("failed events are scored but not learned") {
  Engine engine;
  auto failed = make_event("e1", "u1", monday(10));
  failed.success = false;
  engine.process_event(failed);
  CHECK(engine.baselines().at("u1").n() == 0);
  CHECK(engine.identities().at("u1").event_count == 1);
  CHECK_FALSE(engine.graph().has_identity("u1"));
  engine.process_event(make_event("e2", "u1", monday(11)));
  CHECK(engine.baselines().at("u1").n() == 1);
  CHECK(engine.graph().has_identity("u1"));
}

TEST_CASE("one quarantine-triggering identity yields one containment") {
  // Hand trace: 30 routine events warm u1's baseline. The attack event comes
  // from a blocklisted IP (C = 1) at 03:00 on a new device in New York, far
  // outside the baseline, so A > 0.7 and R = 0.5 A + 0.5 > 0.85.
  Engine engine(with_blocklist());
  auto events = routine("u1", 30);
  const auto benign = routine("u2", 30);
  events.insert(events.end(), benign.begin(), benign.end());
  std::stable_sort(events.begin(), events.end(),
                   [](const AccessEvent& a, const AccessEvent& b) { return a.timestamp < b.timestamp; });
  const Timestamp late = monday(3) + 31 * 86400;
  events.push_back(make_event("atk1", "u1", late, "vault", Action::Admin, kNewYork, "evil", "203.0.113.7"));
  events.push_back(make_event("atk2", "u1", late + 60, "r1", Action::Read, kLondon, "d1", "10.0.0.1"));

  const auto result = replay(engine, events);
  REQUIRE(result.containments.size() == 1);
  CHECK(result.containments[0].identity_id == "u1");
  CHECK(result.containments[0].deactivated == std::vector<std::string>{"r1", "r2"});
  CHECK(engine.tier_of("atk1") == Tier::Quarantine);
  CHECK(engine.tier_of("atk2") == Tier::Quarantine);  // sticky
  CHECK(engine.graph().blast_radius("u1").empty());
  CHECK(engine.graph().blast_radius("u2") == std::set<std::string>{"r1", "r2"});
  CHECK(engine.tier_of("u2-e29") == Tier::Allow);

  engine.release("u1");
  CHECK(engine.graph().blast_radius("u1") == std::set<std::string>{"r1", "r2"});
  CHECK_FALSE(engine.identities().at("u1").quarantined);
}

TEST_CASE("replay determinism and empty log") {
  Engine empty;
  CHECK(replay(empty, std::vector<AccessEvent>{}).audit.empty());

  auto events = routine("u1", 25);
  auto run = [&] {
    Engine engine(with_blocklist());
    std::ostringstream out;
    write_audit_log(out, replay(engine, events).audit);
    return out.str();
  };
  const auto a = run();
  CHECK(a == run());
  CHECK(a.find("\"u1\"") == std::string::npos);
}

TEST_CASE("audit record round-trip") {
  AuditRecord r;
  r.event_id = "e1";
  r.identity = "abc";
  r.timestamp = 42;
  r.anomaly = 0.1234567890123;
  r.context = 0.4;
  r.risk = 0.2617283945;
  r.tier = Tier::StepUp;
  r.reasons = {"risk_above_step_up", "off_hours"};
  r.engine = "dynamic";
  CHECK(parse_audit(serialize_audit(r)) == r);
  r.peer = 0.3;
  r.w_peer = 0.2;
  CHECK(parse_audit(serialize_audit(r)) == r);
  CHECK_THROWS_AS(parse_audit("{}"), ValidationError);
  std::istringstream bad("{\"event_id\":1}\n");
  CHECK_THROWS_AS(read_audit_log(bad), ParseError);
}

TEST_CASE("config round-trip and validation") {
  EngineConfig cfg = with_blocklist();
  cfg.weights = {0.6, 0.4, 0.0};
  cfg.thresholds = {0.4, 0.6, 0.8};
  cfg.context.blocked_regions.push_back({1, 2, 3, 4});
  cfg.salt = "pepper";
  CHECK(config_from_json(config_to_json(cfg)) == cfg);
  CHECK(config_from_json(nlohmann::json::object()) == EngineConfig{});

  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"weights", {{"w1", 0.9}, {"w2", 0.9}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"thresholds", {{"step_up", 0.9}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"blocklist", {"1.2.3.4/40"}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"salt", ""}}), ConfigError);
}

TEST_CASE("adjust_thresholds examples") {
  const Thresholds t;
  const auto fp = adjust_thresholds(t, Judgment::FalsePositive, Tier::StepUp, 0.05);
  CHECK(fp.step_up == 0.525);
  CHECK(fp.restrict == t.restrict);
  CHECK(adjust_thresholds(t, Judgment::TruePositive, Tier::Restrict, 0.05) == t);

  const auto miss = adjust_thresholds(t, Judgment::MissedThreat, Tier::Allow, 0.05);
  CHECK(miss.step_up == doctest::Approx(0.475));
  CHECK(miss.restrict == doctest::Approx(0.665));
  CHECK(miss.quarantine == doctest::Approx(0.8075));

  Thresholds q = t;
  for (int i = 0; i < 100; ++i) q = adjust_thresholds(q, Judgment::FalsePositive, Tier::Quarantine, 0.05);
  CHECK(q.quarantine == kQuarantineCap);
  CHECK(q.is_valid());

  Thresholds s = t;
  for (int i = 0; i < 100; ++i) {
    s = adjust_thresholds(s, Judgment::FalsePositive, static_cast<Tier>(1 + i % 3), 0.05);
    REQUIRE(s.is_valid());
    REQUIRE(s.quarantine < 0.99);
  }
  Thresholds m = t;
  for (int i = 0; i < 200; ++i) m = adjust_thresholds(m, Judgment::MissedThreat, Tier::Allow, 0.05);
  CHECK(m.step_up == doctest::Approx(kThresholdFloor));
  CHECK(m.is_valid());
}

TEST_CASE("adjust_thresholds random sequences") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> pick(0, 2), tier(0, 3);
  std::uniform_real_distribution<double> rate(0.0, 0.5);
  for (int seq = 0; seq < 2000; ++seq) {
    Thresholds t;
    const double eta = rate(rng);
    for (int i = 0; i < 50; ++i) {
      t = adjust_thresholds(t, static_cast<Judgment>(pick(rng)), static_cast<Tier>(tier(rng)), eta);
      REQUIRE(t.is_valid());
      REQUIRE(t.step_up >= kThresholdFloor - 1e-15);
      REQUIRE(t.quarantine <= kQuarantineCap);
    }
  }
}

TEST_CASE("Engine::apply_feedback") {
  Engine engine;
  CHECK_THROWS_AS(engine.apply_feedback({"nope", Judgment::FalsePositive}), ReferenceError);
  engine.apply_feedback({"nope", Judgment::MissedThreat});
  CHECK(engine.thresholds().step_up == doctest::Approx(0.475));
  engine.process_event(make_event("e1", "u1", monday(10)));
  engine.apply_feedback({"e1", Judgment::FalsePositive});  // Allow: nothing to relax
  CHECK(engine.thresholds().step_up == doctest::Approx(0.475));
}

TEST_CASE("static baseline") {
  StaticEngine engine(with_blocklist());
  CHECK(engine.process_event(make_event("e1", "u1", monday(10))).first.tier == Tier::Restrict);  // new device
  CHECK(engine.process_event(make_event("e2", "u1", monday(10, 5))).first.tier == Tier::Allow);
  CHECK(engine.process_event(make_event("e3", "u1", monday(3) + 86400)).first.tier == Tier::Restrict);
  // A compromised account on a known device in business hours passes.
  const auto blind = engine.process_event(make_event("e4", "u1", monday(11) + 86400, "vault", Action::Admin));
  CHECK(blind.first.tier == Tier::Allow);
  CHECK(blind.second.engine == "static");
  const auto blocked =
      engine.process_event(make_event("e5", "u1", monday(12) + 86400, "r1", Action::Read, kLondon, "d1", "203.0.113.1"));
  CHECK(blocked.first.tier == Tier::Restrict);
}

TEST_CASE("peer factor") {
  EngineConfig cfg;
  cfg.weights = {0.4, 0.4, 0.2};
  cfg.peer_k = 2;
  Engine engine(cfg);
  std::vector<AccessEvent> events;
  for (int u = 0; u < 4; ++u) {
    const auto r = routine("p" + std::to_string(u), 25);
    events.insert(events.end(), r.begin(), r.end());
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const AccessEvent& a, const AccessEvent& b) { return a.timestamp < b.timestamp; });
  replay(engine, events);
  CHECK_FALSE(engine.peer_model().has_value());
  engine.refresh_peer_model();
  REQUIRE(engine.peer_model().has_value());
  CHECK(engine.peer_model()->assignments.size() == 4);
  const auto r = engine.process_event(make_event("x", "p0", monday(10) + 40 * 86400, "r1"));
  REQUIRE(r.audit.peer.has_value());
  CHECK(*r.audit.w_peer == 0.2);
  CHECK(r.assessment.factors.size() == 3);
}
