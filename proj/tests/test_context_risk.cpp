#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "ztseg/context_risk.hpp"
#include "ztseg/errors.hpp"

using namespace ztseg;
using namespace ztseg::testing;

namespace {

IdentityState known_state() {
  IdentityState s;
  s.observe(make_event("p", "u1", monday(9), "portal", Action::Login));
  return s;
}

}  // namespace

TEST_CASE("Ipv4Prefix") {
  const auto p = Ipv4Prefix::parse("198.51.100.0/24");
  CHECK(p.contains(*parse_ipv4("198.51.100.7")));
  CHECK_FALSE(p.contains(*parse_ipv4("198.51.101.7")));
  CHECK(p.to_string() == "198.51.100.0/24");
  CHECK(Ipv4Prefix::parse("0.0.0.0/0").contains(*parse_ipv4("8.8.8.8")));
  CHECK(Ipv4Prefix::parse("10.1.2.3/32").contains(*parse_ipv4("10.1.2.3")));
  CHECK_THROWS_AS(Ipv4Prefix::parse("10.0.0.0/33"), ConfigError);
  CHECK_THROWS_AS(Ipv4Prefix::parse("10.0.0/8"), ConfigError);
  CHECK(Ipv4Prefix::parse("10.0.0.7").length == 32);
}

TEST_CASE("contextual_score") {
  ContextConfig cfg;
  cfg.blocklist.push_back(Ipv4Prefix::parse("203.0.113.0/24"));
  const auto state = known_state();

  GeoPoint near = kLondon;
  near.lat += 0.009;  // ~1 km north
  const auto clean = make_event("e1", "u1", monday(10), "r1", Action::Read, near);
  const auto c = contextual_score(clean, state, cfg);
  CHECK(c.value == 0.0);
  CHECK(c.reason_codes().empty());

  auto blocked = clean;
  blocked.source_ip = "203.0.113.9";
  const auto cb = contextual_score(blocked, state, cfg);
  CHECK(cb.value == 1.0);
  CHECK(cb.saturated);

  auto novel = clean;
  novel.device_id = "d9";
  novel.timestamp = monday(3);
  CHECK(contextual_score(novel, state, cfg).value == doctest::Approx(0.40).epsilon(1e-12));

  auto away = clean;
  away.geo = kNewYork;
  const auto ca = contextual_score(away, state, cfg);
  CHECK(ca.value == doctest::Approx(0.25));
  CHECK(ca.unfamiliar_location);

  IdentityState fresh;
  const auto first = contextual_score(make_event("e2", "u1", monday(10), "r1", Action::Read, kNewYork), fresh, cfg);
  CHECK_FALSE(first.unfamiliar_location);
  CHECK_FALSE(first.unknown_device);
  CHECK(first.value == 0.0);

  cfg.blocked_regions.push_back({40, 41, -75, -73});
  const auto region = contextual_score(away, state, cfg);
  CHECK(region.value == 1.0);

  CHECK(cfg.is_business_hour(monday(8)));
  CHECK_FALSE(cfg.is_business_hour(monday(18)));
  CHECK_FALSE(cfg.is_business_hour(monday(7, 59)));
}

TEST_CASE("ContextConfig::validate") {
  ContextConfig cfg;
  cfg.validate();
  cfg.weights.off_hours = 0.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.business_start_hour = 18;
  cfg.business_end_hour = 8;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("risk_score and aggregate_risk") {
  CHECK(risk_score(0, 0, 0.5, 0.5) == 0.0);
  CHECK(risk_score(1, 1, 0.3, 0.7) == 1.0);
  CHECK(risk_score(0.8, 0.4, 0.6, 0.4) == doctest::Approx(0.64).epsilon(1e-12));
  CHECK_THROWS_AS(risk_score(0.5, 0.5, 0.6, 0.6), ConfigError);
  CHECK_THROWS_AS(risk_score(1.5, 0.5, 0.5, 0.5), ContractViolation);

  const std::vector<RiskFactor> three = {{"a", 0.2, 1.0 / 3}, {"b", 0.5, 1.0 / 3}, {"c", 0.9, 1.0 / 3}};
  CHECK(std::abs(aggregate_risk(three) - 0.5333333333333333) < 1e-12);
  const std::vector<RiskFactor> one = {{"x", 0.37, 1.0}};
  CHECK(aggregate_risk(one) == 0.37);
  const std::vector<RiskFactor> bad = {{"x", 0.37, 0.5}};
  CHECK_THROWS_AS(aggregate_risk(bad), ConfigError);

  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), c = u(rng), w1 = u(rng), w2 = 1.0 - w1;
    const std::vector<RiskFactor> f = {{"A", a, w1}, {"C", c, w2}};
    CHECK(aggregate_risk(f) == risk_score(a, c, w1, w2));
    CHECK(risk_score(a, c, w1, w2) == doctest::Approx(risk_score(c, a, w2, w1)).epsilon(1e-15));
  }
}

TEST_CASE("decide") {
  const Thresholds t;
  CHECK(decide(0.3, t, false).tier == Tier::Allow);
  CHECK(decide(0.9, t, false).tier == Tier::Quarantine);
  CHECK(decide(0.5, t, false).tier == Tier::Allow);
  CHECK(decide(0.7, t, false).tier == Tier::StepUp);
  CHECK(decide(0.85, t, false).tier == Tier::Restrict);
  CHECK(decide(0.0, t, true).tier == Tier::Quarantine);
  CHECK_FALSE(decide(0.0, t, true).reasons.empty());
  CHECK_FALSE(decide(0.6, t, false).reasons.empty());
  CHECK(decide(0.2, t, false).reasons.empty());

  Tier prev = Tier::Allow;
  for (int i = 0; i <= 10000; ++i) {
    const auto tier = decide(i / 10000.0, t, false).tier;
    CHECK(tier >= prev);
    prev = tier;
  }
}

TEST_CASE("Tier and Thresholds") {
  for (auto tier : {Tier::Allow, Tier::StepUp, Tier::Restrict, Tier::Quarantine}) {
    CHECK(parse_tier(to_string(tier)) == tier);
  }
  CHECK_FALSE(parse_tier("Block").has_value());
  Thresholds t;
  CHECK(t.is_valid());
  t.restrict = 0.4;
  CHECK_FALSE(t.is_valid());
  CHECK_THROWS_AS(t.validate(), ConfigError);
}
