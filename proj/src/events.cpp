#include "ztseg/events.hpp"

#include <openssl/sha.h>

#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "ztseg/errors.hpp"

namespace ztseg {

namespace {

constexpr std::array<std::string_view, 4> kActionNames = {"Login", "Read", "Write", "Admin"};

const char* const kRequiredKeys[] = {"event_id", "resource_id", "identity_id", "timestamp",
                                     "action",   "lat",         "lon",         "device_id",
                                     "source_ip", "success"};

AccessEvent event_from_json(const nlohmann::json& j, std::size_t line) {
  if (!j.is_object()) throw ParseError(line, "expected a JSON object");
  for (const char* key : kRequiredKeys) {
    if (!j.contains(key)) throw ParseError(line, std::string("missing key \"") + key + "\"");
  }
  auto need_string = [&](const char* key) -> std::string {
    const auto& v = j.at(key);
    if (!v.is_string()) throw ParseError(line, std::string("\"") + key + "\" must be a string");
    return v.get<std::string>();
  };
  auto need_number = [&](const char* key) -> double {
    const auto& v = j.at(key);
    if (!v.is_number()) throw ParseError(line, std::string("\"") + key + "\" must be a number");
    return v.get<double>();
  };

  AccessEvent e;
  e.event_id = need_string("event_id");
  e.identity_id = need_string("identity_id");
  const auto& ts = j.at("timestamp");
  if (!ts.is_number_integer()) throw ParseError(line, "\"timestamp\" must be an integer");
  e.timestamp = ts.get<Timestamp>();
  e.resource_id = need_string("resource_id");
  const auto action_text = need_string("action");
  const auto action = parse_action(action_text);
  if (!action) throw ParseError(line, "unknown action \"" + action_text + "\"");
  e.action = *action;
  e.geo = {need_number("lat"), need_number("lon")};
  e.device_id = need_string("device_id");
  e.source_ip = need_string("source_ip");
  const auto& success = j.at("success");
  if (!success.is_boolean()) throw ParseError(line, "\"success\" must be a boolean");
  e.success = success.get<bool>();
  return e;
}

}  // namespace

std::string_view to_string(Action action) {
  return kActionNames.at(static_cast<std::size_t>(action));
}

std::optional<Action> parse_action(std::string_view text) {
  for (std::size_t i = 0; i < kActionNames.size(); ++i) {
    if (kActionNames[i] == text) return static_cast<Action>(i);
  }
  return std::nullopt;
}

bool is_ipv4(std::string_view text) {
  int octets = 0;
  std::size_t pos = 0;
  while (true) {
    const auto dot = text.find('.', pos);
    const auto part = text.substr(pos, dot == std::string_view::npos ? text.npos : dot - pos);
    if (part.empty() || part.size() > 3) return false;
    unsigned value = 0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
    if (ec != std::errc{} || ptr != part.data() + part.size() || value > 255) return false;
    ++octets;
    if (dot == std::string_view::npos) break;
    pos = dot + 1;
  }
  return octets == 4;
}

ValidationResult validate_event(const AccessEvent& event) {
  ValidationResult result;
  auto& v = result.violations;
  if (event.event_id.empty()) v.emplace_back("event_id empty");
  if (event.identity_id.empty()) v.emplace_back("identity_id empty");
  if (event.resource_id.empty()) v.emplace_back("resource_id empty");
  if (event.device_id.empty()) v.emplace_back("device_id empty");
  if (event.timestamp <= 0) v.emplace_back("timestamp not positive");
  // Negated comparisons so NaN lands in the violation branch.
  if (!(event.geo.lat >= -90.0 && event.geo.lat <= 90.0)) v.emplace_back("latitude out of range");
  if (!(event.geo.lon >= -180.0 && event.geo.lon <= 180.0)) {
    v.emplace_back("longitude out of range");
  }
  if (!is_ipv4(event.source_ip)) v.emplace_back("source_ip not an IPv4 dotted quad");
  return result;
}

std::vector<AccessEvent> parse_event_log(std::istream& in) {
  std::vector<AccessEvent> events;
  std::unordered_set<std::string> seen_ids;
  std::unordered_map<std::string, Timestamp> last_seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& err) {
      throw ParseError(line, std::string("malformed JSON: ") + err.what());
    }
    auto event = event_from_json(j, line);
    const auto check = validate_event(event);
    if (!check.ok()) {
      std::string msg = "invalid event";
      for (const auto& violation : check.violations) msg += "; " + violation;
      throw ParseError(line, msg);
    }
    if (!seen_ids.insert(event.event_id).second) {
      throw ParseError(line, "duplicate event_id \"" + event.event_id + "\"");
    }
    auto [it, inserted] = last_seen.try_emplace(event.identity_id, event.timestamp);
    if (!inserted) {
      if (event.timestamp < it->second) {
        throw OrderingError(event.event_id, "line " + std::to_string(line) + ": event \"" +
                                                event.event_id + "\" for identity \"" +
                                                event.identity_id + "\" is older than its predecessor");
      }
      it->second = event.timestamp;
    }
    events.push_back(std::move(event));
  }
  return events;
}

std::vector<AccessEvent> parse_event_log(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_event_log(in);
}

std::string serialize_event(const AccessEvent& event) {
  nlohmann::ordered_json j;
  j["event_id"] = event.event_id;
  j["identity_id"] = event.identity_id;
  j["timestamp"] = event.timestamp;
  j["resource_id"] = event.resource_id;
  j["action"] = to_string(event.action);
  j["lat"] = event.geo.lat;
  j["lon"] = event.geo.lon;
  j["device_id"] = event.device_id;
  j["source_ip"] = event.source_ip;
  j["success"] = event.success;
  return j.dump();
}

void write_event_log(std::ostream& out, const std::vector<AccessEvent>& events) {
  for (const auto& e : events) out << serialize_event(e) << '\n';
}

std::uint64_t IdentityState::device_count(const std::string& device_id) const {
  const auto it = known_devices.find(device_id);
  return it == known_devices.end() ? 0 : it->second.count;
}

std::uint64_t IdentityState::resource_count(const std::string& resource_id) const {
  const auto it = resource_counts.find(resource_id);
  return it == resource_counts.end() ? 0 : it->second;
}

void IdentityState::observe(const AccessEvent& event) {
  ++event_count;
  last_timestamp = event.timestamp;
  if (!event.success) return;

  auto [it, inserted] = known_devices.try_emplace(event.device_id);
  if (inserted) it->second.first_seen = event.timestamp;
  it->second.last_seen = event.timestamp;
  ++it->second.count;

  if (event.action == Action::Login) {
    login_locations.push_back({event.timestamp, event.geo});
    if (login_locations.size() > kMaxLoginLocations) login_locations.pop_front();
  }
  ++resource_counts[event.resource_id];
}

Pseudonym pseudonymize(std::string_view identifier, std::string_view salt) {
  if (salt.empty()) throw ConfigError("pseudonymization salt must not be empty");
  std::string input;
  input.reserve(salt.size() + 1 + identifier.size());
  input.append(salt).append(":").append(identifier);

  std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
  SHA256(reinterpret_cast<const unsigned char*>(input.data()), input.size(), digest.data());

  static constexpr char kHex[] = "0123456789abcdef";
  Pseudonym p;
  p.token.resize(32);
  for (std::size_t i = 0; i < 16; ++i) {
    p.token[2 * i] = kHex[digest[i] >> 4];
    p.token[2 * i + 1] = kHex[digest[i] & 0x0f];
  }
  return p;
}

}  // namespace ztseg
