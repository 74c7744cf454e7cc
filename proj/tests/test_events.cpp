#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "ztseg/errors.hpp"
#include "ztseg/events.hpp"
#include "ztseg/geo.hpp"

using namespace ztseg;
using namespace ztseg::testing;

TEST_CASE("validate_event") {
  const auto good = make_event("e1", "u1", monday(10));
  CHECK(validate_event(good).ok());

  auto bad_lat = good;
  bad_lat.geo.lat = 91.0;
  const auto r = validate_event(bad_lat);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0] == "latitude out of range");

  auto two = good;
  two.identity_id.clear();
  two.geo.lon = 200.0;
  CHECK(validate_event(two).violations.size() == 2);

  auto nan = good;
  nan.geo.lat = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(validate_event(nan).ok());

  auto ip = good;
  ip.source_ip = "10.0.0.256";
  CHECK_FALSE(validate_event(ip).ok());
  ip.source_ip = "10.0.0";
  CHECK_FALSE(validate_event(ip).ok());
}

TEST_CASE("is_ipv4") {
  CHECK(is_ipv4("0.0.0.0"));
  CHECK(is_ipv4("255.255.255.255"));
  CHECK_FALSE(is_ipv4("1.2.3"));
  CHECK_FALSE(is_ipv4("1.2.3.4.5"));
  CHECK_FALSE(is_ipv4("a.b.c.d"));
  CHECK_FALSE(is_ipv4(""));
}

TEST_CASE("parse_event_log") {
  CHECK(parse_event_log(std::string_view{}).empty());

  std::vector<AccessEvent> src = {make_event("e1", "u1", 100), make_event("e2", "u2", 90),
                                  make_event("e3", "u1", 200, "r2", Action::Write)};
  std::ostringstream out;
  write_event_log(out, src);
  const auto parsed = parse_event_log(out.str());
  REQUIRE(parsed.size() == 3);
  CHECK(parsed == src);

  SUBCASE("blank lines skipped") {
    CHECK(parse_event_log("\n" + out.str() + "\n\n").size() == 3);
  }

  SUBCASE("ordering error names the second event") {
    const std::string log = serialize_event(make_event("e1", "u1", 100)) + "\n" +
                            serialize_event(make_event("e2", "u1", 50)) + "\n";
    try {
      parse_event_log(log);
      FAIL("expected OrderingError");
    } catch (const OrderingError& err) {
      CHECK(err.event_id() == "e2");
    }
  }

  SUBCASE("malformed line reports its number") {
    const std::string log = serialize_event(make_event("e1", "u1", 100)) + "\n{not json\n";
    try {
      parse_event_log(log);
      FAIL("expected ParseError");
    } catch (const ParseError& err) {
      CHECK(err.line() == 2);
    }
  }

  SUBCASE("invalid event and duplicates rejected") {
    auto bad = make_event("e1", "u1", 100);
    bad.geo.lat = 95;
    CHECK_THROWS_AS(parse_event_log(serialize_event(bad)), ParseError);
    const std::string dup = serialize_event(make_event("e1", "u1", 100)) + "\n" +
                            serialize_event(make_event("e1", "u2", 100)) + "\n";
    CHECK_THROWS_AS(parse_event_log(dup), ParseError);
    CHECK_THROWS_AS(parse_event_log(R"({"event_id":"e1"})"), ParseError);
  }
}

TEST_CASE("pseudonymize") {
  // SHA-256("s1:alice") computed with Python's hashlib.
  CHECK(pseudonymize("alice", "s1").token == "84087d4ff1b420780f1e4f4ae9bc7248");
  CHECK(pseudonymize("alice", "s1") == pseudonymize("alice", "s1"));
  CHECK(pseudonymize("alice", "s1") != pseudonymize("alice", "s2"));
  CHECK(pseudonymize("bob", "s1").token.size() == 32);
  CHECK_THROWS_AS(pseudonymize("alice", ""), ConfigError);
}

TEST_CASE("IdentityState::observe") {
  IdentityState s;
  s.observe(make_event("e1", "u1", 100, "portal", Action::Login));
  s.observe(make_event("e2", "u1", 200, "r1"));
  s.observe(make_event("e3", "u1", 300, "r2", Action::Login, kNewYork, "d2", "10.0.0.1", false));
  CHECK(s.event_count == 3);
  CHECK(s.last_timestamp == 300);
  CHECK(s.device_count("d1") == 2);
  CHECK_FALSE(s.knows_device("d2"));
  CHECK(s.resource_count("r1") == 1);
  CHECK(s.resource_count("r2") == 0);
  REQUIRE(s.login_locations.size() == 1);
  CHECK(s.login_locations.front().geo == kLondon);

  for (int i = 0; i < 150; ++i) s.observe(make_event("x", "u1", 1000 + i, "portal", Action::Login));
  CHECK(s.login_locations.size() == IdentityState::kMaxLoginLocations);
  CHECK(s.login_locations.back().timestamp == 1149);
}

TEST_CASE("haversine") {
  CHECK(haversine_km(kLondon, kLondon) == 0.0);
  // Oracle: independent Python haversine, R = 6371 km.
  CHECK(haversine_km(kLondon, kNewYork) == doctest::Approx(5570.222179737958).epsilon(1e-9));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lat(-90, 90), lon(-180, 180);
  for (int i = 0; i < 1000; ++i) {
    const GeoPoint a{lat(rng), lon(rng)}, b{lat(rng), lon(rng)};
    CHECK(haversine_km(a, b) == haversine_km(b, a));
  }
  CHECK(haversine_km({0, 0}, {0, 180}) == doctest::Approx(M_PI * kEarthRadiusKm));
}
