#include "ztseg/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <tuple>

#include "ztseg/errors.hpp"

namespace ztseg {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::int64_t kDay = 86400;
constexpr std::int64_t kHour = 3600;
constexpr double kGeoJitterKm = 20.0;
constexpr double kKmPerDegree = 111.32;
constexpr double kFarAwayKm = 3000.0;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Distributions written out by hand so output does not depend on the
// standard library's <random> distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {  // inclusive
    const auto span = static_cast<double>(hi - lo + 1);
    return std::min(hi, lo + static_cast<std::int64_t>(uniform() * span));
  }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  int poisson(double mean) {
    const double limit = std::exp(-mean);
    int k = 0;
    double p = uniform();
    while (p > limit) {
      ++k;
      p *= uniform();
    }
    return k;
  }
  template <typename T>
  const T& pick(const std::vector<T>& items) {
    return items[static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(items.size()) - 1))];
  }
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

struct City {
  const char* name;
  GeoPoint geo;
};

// Attacker vantage points; each candidate is kept only if it is at least
// kFarAwayKm from the victim's home office.
const std::vector<City>& attacker_cities() {
  static const std::vector<City> cities = {
      {"sao-paulo", {-23.5505, -46.6333}}, {"lagos", {6.5244, 3.3792}},
      {"moscow", {55.7558, 37.6173}},      {"beijing", {39.9042, 116.4074}},
      {"sydney", {-33.8688, 151.2093}},    {"mumbai", {19.0760, 72.8777}},
      {"johannesburg", {-26.2041, 28.0473}}, {"los-angeles", {34.0522, -118.2437}},
      {"tokyo", {35.6762, 139.6503}},      {"buenos-aires", {-34.6037, -58.3816}}};
  return cities;
}

GeoPoint jitter(Rng& rng, const GeoPoint& home, double sigma_km) {
  GeoPoint p;
  p.lat = home.lat + rng.normal() * sigma_km / kKmPerDegree;
  const double lon_scale = kKmPerDegree * std::max(0.1, std::cos(home.lat * std::numbers::pi / 180.0));
  p.lon = home.lon + rng.normal() * sigma_km / lon_scale;
  p.lat = std::clamp(p.lat, -90.0, 90.0);
  if (p.lon > 180.0) p.lon -= 360.0;
  if (p.lon < -180.0) p.lon += 360.0;
  return p;
}

std::string format_index(const char* prefix, std::size_t index, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, index);
  return buf;
}

Action pick_action(Rng& rng) {
  const double u = rng.uniform();
  if (u < 0.70) return Action::Read;
  if (u < 0.95) return Action::Write;
  return Action::Admin;
}

struct Draft {
  Timestamp timestamp;
  std::string resource;
  Action action;
  GeoPoint geo;
  std::string device;
  std::string ip;
  bool malicious;
};

struct IdentityPlan {
  std::string id;
  std::size_t index = 0;
  const RoleProfile* role = nullptr;
  std::vector<std::string> devices;
  int work_start = 8;
  int work_end = 17;
  std::string home_ip;
};

std::vector<std::string> foreign_resources(const ScenarioSpec& spec, const RoleProfile& own) {
  std::vector<std::string> out = ScenarioSpec::restricted_resources();
  for (const auto& role : spec.roles) {
    if (role.name == own.name) continue;
    out.insert(out.end(), role.resources.begin(), role.resources.end());
  }
  return out;
}

std::vector<std::string> draw_distinct(Rng& rng, std::vector<std::string> pool, std::size_t count) {
  rng.shuffle(pool);
  pool.resize(std::min(count, pool.size()));
  return pool;
}

// First timestamp >= t whose hour of day is `hour`.
Timestamp next_hour_of_day(Timestamp t, int hour) {
  Timestamp day_start = t - ((t % kDay) + kDay) % kDay;
  Timestamp candidate = day_start + hour * kHour;
  if (candidate < t) candidate += kDay;
  return candidate;
}

void benign_days(const ScenarioSpec& spec, const IdentityPlan& plan, Rng& rng,
                 std::vector<Draft>& out) {
  const auto& role = *plan.role;
  for (int day = 0; day < spec.days; ++day) {
    const int count = rng.poisson(spec.events_per_identity_per_day);
    if (count == 0) continue;
    const std::string& device = rng.pick(plan.devices);
    const GeoPoint geo = jitter(rng, role.home, kGeoJitterKm);
    const Timestamp window_start = spec.start + day * kDay + plan.work_start * kHour;
    const std::int64_t window_len = (plan.work_end - plan.work_start) * kHour;
    std::vector<Timestamp> times(static_cast<std::size_t>(count));
    for (auto& t : times) t = window_start + rng.uniform_int(0, window_len - 1);
    std::sort(times.begin(), times.end());
    for (int i = 0; i < count; ++i) {
      const bool login = i == 0;
      out.push_back({times[static_cast<std::size_t>(i)], login ? "portal" : rng.pick(role.resources),
                     login ? Action::Login : pick_action(rng), geo, device, plan.home_ip, false});
    }
  }
}

void credential_compromise(const ScenarioSpec& spec, const IdentityPlan& plan, Timestamp onset,
                           Rng& rng, std::vector<Draft>& out) {
  std::vector<City> far;
  for (const auto& c : attacker_cities()) {
    if (haversine_km(c.geo, plan.role->home) >= kFarAwayKm + 100.0) far.push_back(c);
  }
  const City& city = rng.pick(far);
  const std::string device = "atk-" + plan.id;
  std::string ip;
  if (!spec.threat_intel.empty() && rng.uniform() < spec.known_bad_source_fraction) {
    const auto prefix = Ipv4Prefix::parse(rng.pick(spec.threat_intel));
    const std::uint32_t host_bits = prefix.length >= 32 ? 0u : (~0u >> prefix.length);
    const std::uint32_t addr = prefix.network | (static_cast<std::uint32_t>(rng.uniform_int(1, 254)) & host_bits);
    ip = std::to_string(addr >> 24) + "." + std::to_string((addr >> 16) & 0xff) + "." +
         std::to_string((addr >> 8) & 0xff) + "." + std::to_string(addr & 0xff);
  } else {
    ip = "185.220." + std::to_string(rng.uniform_int(100, 110)) + "." +
         std::to_string(rng.uniform_int(1, 254));
  }
  const auto targets = foreign_resources(spec, *plan.role);
  Timestamp t = onset;
  for (int session = 0; session < 2; ++session) {
    const GeoPoint geo = jitter(rng, city.geo, 5.0);
    out.push_back({t, "portal", Action::Login, geo, device, ip, true});
    const auto resources = draw_distinct(rng, targets, static_cast<std::size_t>(rng.uniform_int(6, 9)));
    for (const auto& r : resources) {
      t += rng.uniform_int(60, 300);
      out.push_back({t, r, pick_action(rng), geo, device, ip, true});
    }
    t += rng.uniform_int(18 * kHour, 30 * kHour);
  }
}

void insider_off_hours(const ScenarioSpec& spec, const IdentityPlan& plan, Timestamp onset,
                       Rng& rng, std::vector<Draft>& out) {
  (void)spec;
  const auto restricted = ScenarioSpec::restricted_resources();
  // Sessions start at least 2 h after the window closes and end before it
  // reopens; each lasts under 30 minutes.
  const int gap_hours = 24 - (plan.work_end - plan.work_start);
  Timestamp day_cursor = onset;
  for (int night = 0; night < 3; ++night) {
    const int hour = (plan.work_end + 2 + static_cast<int>(rng.uniform_int(0, gap_hours - 4))) % 24;
    Timestamp t = next_hour_of_day(day_cursor, hour) + rng.uniform_int(0, 15 * 60);
    const std::string& device = rng.pick(plan.devices);
    const GeoPoint geo = jitter(rng, plan.role->home, kGeoJitterKm);
    out.push_back({t, "portal", Action::Login, geo, device, plan.home_ip, true});
    const auto count = rng.uniform_int(3, 5);
    for (std::int64_t i = 0; i < count; ++i) {
      t += rng.uniform_int(60, 240);
      out.push_back({t, rng.pick(restricted), pick_action(rng), geo, device, plan.home_ip, true});
    }
    day_cursor = t + 12 * kHour;
  }
}

void lateral_movement(const ScenarioSpec& spec, const IdentityPlan& plan, Timestamp onset,
                      Rng& rng, std::vector<Draft>& out) {
  const auto targets = foreign_resources(spec, *plan.role);
  Timestamp day_cursor = onset;
  for (int burst = 0; burst < 2; ++burst) {
    const std::int64_t window_len = (plan.work_end - plan.work_start) * kHour;
    Timestamp t = next_hour_of_day(day_cursor, plan.work_start) +
                  rng.uniform_int(0, window_len - 2 * kHour);
    const std::string& device = rng.pick(plan.devices);
    const GeoPoint geo = jitter(rng, plan.role->home, kGeoJitterKm);
    out.push_back({t, "portal", Action::Login, geo, device, plan.home_ip, true});
    // 10-13 distinct resources, 2-4.5 minutes apart: under an hour in total.
    const auto resources = draw_distinct(rng, targets, static_cast<std::size_t>(rng.uniform_int(10, 13)));
    for (const auto& r : resources) {
      t += rng.uniform_int(120, 270);
      out.push_back({t, r, Action::Read, geo, device, plan.home_ip, true});
    }
    day_cursor = t + 20 * kHour;
  }
}

std::vector<AttackKind> allocate_kinds(const AttackMix& mix, int n) {
  const double shares[3] = {mix.credential_compromise, mix.insider_off_hours, mix.lateral_movement};
  int counts[3];
  double remainders[3];
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = shares[i] * n;
    counts[i] = static_cast<int>(std::floor(exact + 1e-9));
    remainders[i] = exact - counts[i];
    assigned += counts[i];
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i) {
      if (remainders[i] > remainders[best] + 1e-12) best = i;
    }
    ++counts[best];
    remainders[best] = -1.0;
    ++assigned;
  }
  std::vector<AttackKind> kinds;
  for (int i = 0; i < 3; ++i) kinds.insert(kinds.end(), static_cast<std::size_t>(counts[i]), static_cast<AttackKind>(i));
  return kinds;
}

ojson metrics_to_json(const Metrics& m) {
  ojson j;
  j["recall"] = m.recall;
  j["false_positive_rate"] = m.false_positive_rate;
  j["mean_containment"] = m.mean_containment ? ojson(*m.mean_containment) : ojson(nullptr);
  j["contained"] = m.contained;
  j["uncontained"] = m.uncontained;
  j["compromised_total"] = m.compromised_total;
  j["benign_total"] = m.benign_total;
  j["throughput_eps"] = m.throughput_eps;
  j["mean_latency_us"] = m.mean_latency_us;
  return j;
}

Metrics metrics_from_json(const nlohmann::json& j) {
  Metrics m;
  m.recall = j.at("recall").get<double>();
  m.false_positive_rate = j.at("false_positive_rate").get<double>();
  if (!j.at("mean_containment").is_null()) m.mean_containment = j.at("mean_containment").get<double>();
  m.contained = j.at("contained").get<int>();
  m.uncontained = j.at("uncontained").get<int>();
  m.compromised_total = j.at("compromised_total").get<int>();
  m.benign_total = j.at("benign_total").get<int>();
  m.throughput_eps = j.at("throughput_eps").get<double>();
  m.mean_latency_us = j.at("mean_latency_us").get<double>();
  return m;
}

}  // namespace

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::CredentialCompromise: return "CredentialCompromise";
    case AttackKind::InsiderOffHours: return "InsiderOffHours";
    case AttackKind::LateralMovement: return "LateralMovement";
  }
  return "CredentialCompromise";
}

std::optional<AttackKind> parse_attack_kind(std::string_view text) {
  for (auto k : {AttackKind::CredentialCompromise, AttackKind::InsiderOffHours, AttackKind::LateralMovement}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

std::vector<RoleProfile> ScenarioSpec::default_roles() {
  auto pool = [](const char* prefix) {
    std::vector<std::string> r;
    for (int i = 1; i <= 6; ++i) r.push_back(format_index(prefix, static_cast<std::size_t>(i), 2));
    return r;
  };
  return {
      {"engineering-london", pool("eng-repo-"), {51.5074, -0.1278}, 8, 17, 1, 3},
      {"finance-newyork", pool("fin-ledger-"), {40.7128, -74.0060}, 13, 22, 1, 3},
      {"sales-singapore", pool("crm-account-"), {1.3521, 103.8198}, 1, 10, 1, 3},
      {"hr-frankfurt", pool("hr-record-"), {50.1109, 8.6821}, 7, 16, 1, 3},
  };
}

std::vector<std::string> ScenarioSpec::restricted_resources() {
  std::vector<std::string> r;
  for (int i = 1; i <= 6; ++i) r.push_back(format_index("restricted-vault-", static_cast<std::size_t>(i), 2));
  return r;
}

void ScenarioSpec::validate() const {
  if (n_benign < 0 || n_compromised < 0 || days < 0) throw ArgumentError("scenario counts must be non-negative");
  if (n_compromised > n_benign) throw ArgumentError("n_compromised must not exceed n_benign");
  if (!(events_per_identity_per_day >= 0.0 && events_per_identity_per_day <= 200.0)) {
    throw ArgumentError("events_per_identity_per_day must lie in [0, 200]");
  }
  const double mix_sum = attack_mix.credential_compromise + attack_mix.insider_off_hours +
                         attack_mix.lateral_movement;
  if (attack_mix.credential_compromise < 0 || attack_mix.insider_off_hours < 0 ||
      attack_mix.lateral_movement < 0 || std::abs(mix_sum - 1.0) > 1e-9) {
    throw ArgumentError("attack mix fractions must be non-negative and sum to 1");
  }
  if (n_benign + n_compromised > 0 && roles.empty()) throw ArgumentError("at least one role is required");
  for (const auto& r : roles) {
    if (r.resources.empty() || r.resources.size() > 8) throw ArgumentError("role resource pools hold 1-8 resources");
    if (!(0 <= r.work_start_hour && r.work_start_hour < r.work_end_hour && r.work_end_hour <= 24)) {
      throw ArgumentError("role working window must satisfy 0 <= start < end <= 24");
    }
    if (r.work_end_hour - r.work_start_hour > 18) throw ArgumentError("role working window leaves no off-hours");
    if (r.work_end_hour - r.work_start_hour < 3) throw ArgumentError("role working window must span at least 3 hours");
    if (r.min_devices < 1 || r.max_devices > 3 || r.min_devices > r.max_devices) {
      throw ArgumentError("role device counts must lie in 1-3");
    }
  }
  if (!(known_bad_source_fraction >= 0.0 && known_bad_source_fraction <= 1.0)) {
    throw ArgumentError("known_bad_source_fraction must lie in [0, 1]");
  }
  for (const auto& p : threat_intel) {
    try {
      Ipv4Prefix::parse(p);
    } catch (const ConfigError& err) {
      throw ArgumentError(err.what());
    }
  }
  if (start <= 0) throw ArgumentError("scenario start must be a positive timestamp");
}

ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  ScenarioSpec s;
  try {
    if (j.contains("n_benign")) s.n_benign = j.at("n_benign").get<int>();
    if (j.contains("n_compromised")) s.n_compromised = j.at("n_compromised").get<int>();
    if (j.contains("days")) s.days = j.at("days").get<int>();
    if (j.contains("events_per_identity_per_day")) {
      s.events_per_identity_per_day = j.at("events_per_identity_per_day").get<double>();
    }
    if (j.contains("start")) s.start = j.at("start").get<Timestamp>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("threat_intel")) s.threat_intel = j.at("threat_intel").get<std::vector<std::string>>();
    if (j.contains("known_bad_source_fraction")) {
      s.known_bad_source_fraction = j.at("known_bad_source_fraction").get<double>();
    }
    if (j.contains("attack_mix")) {
      const auto& m = j.at("attack_mix");
      s.attack_mix.credential_compromise = m.at("CredentialCompromise").get<double>();
      s.attack_mix.insider_off_hours = m.at("InsiderOffHours").get<double>();
      s.attack_mix.lateral_movement = m.at("LateralMovement").get<double>();
    }
    if (j.contains("roles")) {
      s.roles.clear();
      for (const auto& r : j.at("roles")) {
        RoleProfile p;
        p.name = r.at("name").get<std::string>();
        p.resources = r.at("resources").get<std::vector<std::string>>();
        p.home = {r.at("home").at("lat").get<double>(), r.at("home").at("lon").get<double>()};
        const auto window = r.at("working_hours").get<std::vector<int>>();
        if (window.size() != 2) throw ArgumentError("working_hours must be [start, end]");
        p.work_start_hour = window[0];
        p.work_end_hour = window[1];
        const auto devices = r.at("devices").get<std::vector<int>>();
        if (devices.size() != 2) throw ArgumentError("devices must be [min, max]");
        p.min_devices = devices[0];
        p.max_devices = devices[1];
        s.roles.push_back(std::move(p));
      }
    }
  } catch (const nlohmann::json::exception& err) {
    throw ArgumentError(std::string("bad scenario spec: ") + err.what());
  }
  s.validate();
  return s;
}

nlohmann::ordered_json scenario_to_json(const ScenarioSpec& s) {
  ojson j;
  j["n_benign"] = s.n_benign;
  j["n_compromised"] = s.n_compromised;
  j["days"] = s.days;
  j["events_per_identity_per_day"] = s.events_per_identity_per_day;
  j["start"] = s.start;
  j["seed"] = s.seed;
  j["attack_mix"] = {{"CredentialCompromise", s.attack_mix.credential_compromise},
                     {"InsiderOffHours", s.attack_mix.insider_off_hours},
                     {"LateralMovement", s.attack_mix.lateral_movement}};
  j["threat_intel"] = s.threat_intel;
  j["known_bad_source_fraction"] = s.known_bad_source_fraction;
  j["roles"] = ojson::array();
  for (const auto& r : s.roles) {
    j["roles"].push_back({{"name", r.name},
                          {"resources", r.resources},
                          {"home", {{"lat", r.home.lat}, {"lon", r.home.lon}}},
                          {"working_hours", {r.work_start_hour, r.work_end_hour}},
                          {"devices", {r.min_devices, r.max_devices}}});
  }
  return j;
}

bool GroundTruth::is_malicious(const std::string& event_id) const {
  for (const auto& [id, t] : identities) {
    if (t.malicious_events.contains(event_id)) return true;
  }
  return false;
}

GroundTruth GroundTruth::pseudonymized(const std::string& salt) const {
  GroundTruth out;
  for (const auto& [id, t] : identities) out.identities.emplace(pseudonymize(id, salt).token, t);
  return out;
}

void write_truth(std::ostream& out, const GroundTruth& truth) {
  for (const auto& [id, t] : truth.identities) {
    ojson j;
    j["identity"] = id;
    j["label"] = t.compromised ? "compromised" : "benign";
    j["onset"] = t.compromised ? ojson(t.onset) : ojson(nullptr);
    j["kind"] = t.compromised ? ojson(to_string(t.kind)) : ojson(nullptr);
    j["event_count"] = t.event_count;
    j["malicious_events"] = t.malicious_events;
    out << j.dump() << '\n';
  }
}

GroundTruth read_truth(std::istream& in) {
  GroundTruth truth;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(text);
      IdentityTruth t;
      const auto label = j.at("label").get<std::string>();
      if (label != "benign" && label != "compromised") throw ParseError(line, "unknown label " + label);
      t.compromised = label == "compromised";
      if (t.compromised) {
        t.onset = j.at("onset").get<Timestamp>();
        const auto kind = parse_attack_kind(j.at("kind").get<std::string>());
        if (!kind) throw ParseError(line, "unknown attack kind");
        t.kind = *kind;
      }
      if (j.contains("event_count")) t.event_count = j.at("event_count").get<std::size_t>();
      if (j.contains("malicious_events")) {
        for (const auto& e : j.at("malicious_events")) t.malicious_events.insert(e.get<std::string>());
      }
      truth.identities.emplace(j.at("identity").get<std::string>(), std::move(t));
    } catch (const nlohmann::json::exception& err) {
      throw ParseError(line, err.what());
    }
  }
  return truth;
}

Scenario generate_scenario(const ScenarioSpec& spec) {
  spec.validate();
  Scenario scenario;
  const std::size_t total = static_cast<std::size_t>(spec.n_benign + spec.n_compromised);
  if (total == 0) return scenario;

  Rng master(splitmix64(spec.seed));
  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  master.shuffle(order);
  auto kinds = allocate_kinds(spec.attack_mix, spec.n_compromised);
  master.shuffle(kinds);
  std::map<std::size_t, AttackKind> attacks;
  for (std::size_t i = 0; i < static_cast<std::size_t>(spec.n_compromised); ++i) attacks[order[i]] = kinds[i];

  struct Pending {
    Draft draft;
    std::size_t identity;
    std::size_t seq;
  };
  std::vector<Pending> pending;
  std::vector<std::string> ids(total);

  for (std::size_t i = 0; i < total; ++i) {
    Rng rng(splitmix64(spec.seed ^ splitmix64(i + 1)));
    IdentityPlan plan;
    plan.index = i;
    plan.id = format_index("user-", i + 1, 4);
    ids[i] = plan.id;
    const std::size_t role_index = i % spec.roles.size();
    plan.role = &spec.roles[role_index];
    const auto device_count = rng.uniform_int(plan.role->min_devices, plan.role->max_devices);
    for (std::int64_t d = 1; d <= device_count; ++d) plan.devices.push_back("dev-" + plan.id + "-" + std::to_string(d));
    const int shift = static_cast<int>(rng.uniform_int(-1, 1));
    plan.work_start = std::clamp(plan.role->work_start_hour + shift, 0, 23);
    plan.work_end = std::clamp(plan.role->work_end_hour + shift, plan.work_start + 1, 24);
    plan.home_ip = "10." + std::to_string(role_index % 250 + 1) + "." + std::to_string(i / 250) + "." +
                   std::to_string(i % 250 + 1);

    std::vector<Draft> drafts;
    benign_days(spec, plan, rng, drafts);

    IdentityTruth truth;
    if (const auto it = attacks.find(i); it != attacks.end()) {
      truth.compromised = true;
      truth.kind = it->second;
      const double third = spec.days / 3.0;
      truth.onset = spec.start + static_cast<Timestamp>(rng.uniform(third, 2.0 * third) * kDay);
      switch (truth.kind) {
        case AttackKind::CredentialCompromise: credential_compromise(spec, plan, truth.onset, rng, drafts); break;
        case AttackKind::InsiderOffHours: insider_off_hours(spec, plan, truth.onset, rng, drafts); break;
        case AttackKind::LateralMovement: lateral_movement(spec, plan, truth.onset, rng, drafts); break;
      }
    }

    std::stable_sort(drafts.begin(), drafts.end(),
                     [](const Draft& a, const Draft& b) { return a.timestamp < b.timestamp; });
    // One event per second per identity keeps each timeline strictly ordered.
    for (std::size_t k = 1; k < drafts.size(); ++k) {
      if (drafts[k].timestamp <= drafts[k - 1].timestamp) drafts[k].timestamp = drafts[k - 1].timestamp + 1;
    }
    truth.event_count = drafts.size();
    scenario.truth.identities.emplace(plan.id, std::move(truth));
    for (std::size_t k = 0; k < drafts.size(); ++k) pending.push_back({std::move(drafts[k]), i, k});
  }

  std::sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
    return std::tie(a.draft.timestamp, a.identity, a.seq) < std::tie(b.draft.timestamp, b.identity, b.seq);
  });

  scenario.events.reserve(pending.size());
  for (std::size_t k = 0; k < pending.size(); ++k) {
    auto& p = pending[k];
    AccessEvent e;
    e.event_id = format_index("e", k + 1, 7);
    e.identity_id = ids[p.identity];
    e.timestamp = p.draft.timestamp;
    e.resource_id = std::move(p.draft.resource);
    e.action = p.draft.action;
    e.geo = p.draft.geo;
    e.device_id = std::move(p.draft.device);
    e.source_ip = std::move(p.draft.ip);
    e.success = true;
    if (p.draft.malicious) scenario.truth.identities.at(e.identity_id).malicious_events.insert(e.event_id);
    scenario.events.push_back(std::move(e));
  }
  return scenario;
}

EngineConfig scenario_engine_config(const ScenarioSpec& spec, EngineConfig base) {
  for (const auto& p : spec.threat_intel) {
    const auto prefix = Ipv4Prefix::parse(p);
    if (std::find(base.context.blocklist.begin(), base.context.blocklist.end(), prefix) ==
        base.context.blocklist.end()) {
      base.context.blocklist.push_back(prefix);
    }
  }
  base.validate();
  return base;
}

Metrics evaluate(const std::vector<AuditRecord>& audit, const GroundTruth& truth) {
  std::map<std::string, std::vector<const AuditRecord*>> by_identity;
  for (const auto& r : audit) by_identity[r.identity].push_back(&r);

  Metrics m;
  int detected = 0;
  int benign_flagged = 0;
  double containment_sum = 0.0;
  for (const auto& [id, t] : truth.identities) {
    const auto it = by_identity.find(id);
    if (it == by_identity.end()) throw CoverageError("identity " + id + " has no audit records");
    auto records = it->second;
    std::sort(records.begin(), records.end(), [](const AuditRecord* a, const AuditRecord* b) {
      return std::tie(a->timestamp, a->event_id) < std::tie(b->timestamp, b->event_id);
    });
    if (!t.compromised) {
      ++m.benign_total;
      const bool flagged = std::any_of(records.begin(), records.end(),
                                       [](const AuditRecord* r) { return r->tier >= Tier::Restrict; });
      if (flagged) ++benign_flagged;
      continue;
    }
    ++m.compromised_total;
    const bool hit = std::any_of(records.begin(), records.end(), [&](const AuditRecord* r) {
      return r->timestamp >= t.onset && r->tier >= Tier::Restrict;
    });
    if (hit) ++detected;
    int malicious_seen = 0;
    bool contained = false;
    for (const auto* r : records) {
      if (!t.malicious_events.contains(r->event_id)) continue;
      ++malicious_seen;
      if (r->tier == Tier::Quarantine) {
        contained = true;
        break;
      }
    }
    if (contained) {
      ++m.contained;
      containment_sum += malicious_seen;
    } else {
      ++m.uncontained;
    }
  }
  m.recall = m.compromised_total == 0 ? 0.0 : static_cast<double>(detected) / m.compromised_total;
  m.false_positive_rate = m.benign_total == 0 ? 0.0 : static_cast<double>(benign_flagged) / m.benign_total;
  if (m.contained > 0) m.mean_containment = containment_sum / m.contained;
  return m;
}

ComparisonReport compare(const Metrics& dynamic, const Metrics& static_policy) {
  ComparisonReport r;
  r.dynamic = dynamic;
  r.static_policy = static_policy;
  r.recall_delta = dynamic.recall - static_policy.recall;
  r.fpr_delta = dynamic.false_positive_rate - static_policy.false_positive_rate;
  if (dynamic.mean_containment && static_policy.mean_containment) {
    r.containment_delta = *dynamic.mean_containment - *static_policy.mean_containment;
  }
  r.throughput_delta = dynamic.throughput_eps - static_policy.throughput_eps;
  r.flags["dynamic_higher_recall"] = dynamic.recall > static_policy.recall;
  r.flags["dynamic_lower_fpr"] = dynamic.false_positive_rate < static_policy.false_positive_rate;
  r.flags["dynamic_recall_target"] = dynamic.recall >= kTargetRecall;
  r.flags["dynamic_fpr_target"] = dynamic.false_positive_rate <= kTargetFpr;
  r.flags["dynamic_containment_target"] =
      dynamic.mean_containment.has_value() && *dynamic.mean_containment <= kTargetContainment;
  return r;
}

std::string render_text(const ComparisonReport& r) {
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  auto opt = [&](const std::optional<double>& v) { return v ? fmt(*v) : std::string("n/a"); };
  auto row = [](const std::string& a, const std::string& b, const std::string& c, const std::string& d) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-28s %14s %14s %14s\n", a.c_str(), b.c_str(), c.c_str(), d.c_str());
    return std::string(buf);
  };
  std::string out;
  out += row("metric", "static", "dynamic", "delta");
  out += row("identity recall", fmt(r.static_policy.recall), fmt(r.dynamic.recall), fmt(r.recall_delta));
  out += row("false positive rate", fmt(r.static_policy.false_positive_rate),
             fmt(r.dynamic.false_positive_rate), fmt(r.fpr_delta));
  out += row("mean containment (events)", opt(r.static_policy.mean_containment),
             opt(r.dynamic.mean_containment), opt(r.containment_delta));
  out += row("uncontained identities", std::to_string(r.static_policy.uncontained),
             std::to_string(r.dynamic.uncontained), "");
  out += row("throughput (events/s)", fmt(r.static_policy.throughput_eps), fmt(r.dynamic.throughput_eps),
             fmt(r.throughput_delta));
  out += row("latency proxy (us/event)", fmt(r.static_policy.mean_latency_us), fmt(r.dynamic.mean_latency_us), "");
  out += "\n";
  for (const auto& [name, ok] : r.flags) out += (ok ? "[x] " : "[ ] ") + name + "\n";
  return out;
}

nlohmann::ordered_json report_to_json(const ComparisonReport& r) {
  ojson j;
  j["dynamic"] = metrics_to_json(r.dynamic);
  j["static"] = metrics_to_json(r.static_policy);
  j["deltas"] = {{"recall", r.recall_delta},
                 {"false_positive_rate", r.fpr_delta},
                 {"mean_containment", r.containment_delta ? ojson(*r.containment_delta) : ojson(nullptr)},
                 {"throughput_eps", r.throughput_delta}};
  j["flags"] = ojson::object();
  for (const auto& [name, ok] : r.flags) j["flags"][name] = ok;
  return j;
}

ComparisonReport report_from_json(const nlohmann::json& j) {
  ComparisonReport r;
  try {
    r.dynamic = metrics_from_json(j.at("dynamic"));
    r.static_policy = metrics_from_json(j.at("static"));
    const auto& d = j.at("deltas");
    r.recall_delta = d.at("recall").get<double>();
    r.fpr_delta = d.at("false_positive_rate").get<double>();
    if (!d.at("mean_containment").is_null()) r.containment_delta = d.at("mean_containment").get<double>();
    r.throughput_delta = d.at("throughput_eps").get<double>();
    for (const auto& item : j.at("flags").items()) r.flags[item.key()] = item.value().get<bool>();
  } catch (const nlohmann::json::exception& err) {
    throw ValidationError(std::string("bad comparison report: ") + err.what());
  }
  return r;
}

double shared_resource_exposure(const AccessGraph& graph, const std::vector<std::string>& identities) {
  if (identities.empty()) return 0.0;
  std::map<std::string, std::set<std::string>> holders;  // resource -> identities with active edges
  for (const auto& [key, edge] : graph.edges()) {
    if (edge.active) holders[key.second].insert(key.first);
  }
  double total = 0.0;
  for (const auto& id : identities) {
    std::set<std::string> reachable;
    for (const auto& resource : graph.blast_radius(id)) {
      for (const auto& other : holders[resource]) {
        if (other != id) reachable.insert(other);
      }
    }
    total += static_cast<double>(reachable.size());
  }
  return total / static_cast<double>(identities.size());
}

}  // namespace ztseg
