#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ztseg/geo.hpp"

namespace ztseg {

using Timestamp = std::int64_t;  // UTC seconds since epoch

enum class Action { Login, Read, Write, Admin };

std::string_view to_string(Action action);
std::optional<Action> parse_action(std::string_view text);

/// One authenticated access attempt. One event per request.
struct AccessEvent {
  std::string event_id;
  std::string identity_id;
  Timestamp timestamp = 0;
  std::string resource_id;
  Action action = Action::Read;
  GeoPoint geo;
  std::string device_id;
  std::string source_ip;
  bool success = true;

  friend bool operator==(const AccessEvent&, const AccessEvent&) = default;
};

struct ValidationResult {
  std::vector<std::string> violations;

  bool ok() const noexcept { return violations.empty(); }
};

/// Checks the per-event invariants. Never throws.
ValidationResult validate_event(const AccessEvent& event);

/// True for a dotted quad with four octets in [0, 255].
bool is_ipv4(std::string_view text);

/// Parses a JSON Lines event log. Blank lines are skipped. Throws ParseError
/// (with 1-based line number) for malformed or invalid lines and
/// OrderingError when an identity's timestamps go backwards.
std::vector<AccessEvent> parse_event_log(std::istream& in);
std::vector<AccessEvent> parse_event_log(std::string_view text);

std::string serialize_event(const AccessEvent& event);
void write_event_log(std::ostream& out, const std::vector<AccessEvent>& events);

struct DeviceSighting {
  Timestamp first_seen = 0;
  Timestamp last_seen = 0;
  std::uint64_t count = 0;
};

struct LoginLocation {
  Timestamp timestamp = 0;
  GeoPoint geo;
};

/// Per-identity history used by feature extraction and context scoring.
struct IdentityState {
  static constexpr std::size_t kMaxLoginLocations = 100;

  std::string identity_id;
  std::map<std::string, DeviceSighting> known_devices;
  std::deque<LoginLocation> login_locations;  // ascending by timestamp
  std::map<std::string, std::uint64_t> resource_counts;
  std::uint64_t event_count = 0;
  std::optional<Timestamp> last_timestamp;
  bool quarantined = false;

  bool knows_device(const std::string& device_id) const {
    return known_devices.contains(device_id);
  }
  std::uint64_t device_count(const std::string& device_id) const;
  std::uint64_t resource_count(const std::string& resource_id) const;

  /// Folds an event into the history. Failed attempts only advance the
  /// counters; devices, locations and resource counts learn from successes.
  void observe(const AccessEvent& event);
};

struct Pseudonym {
  std::string token;  // 32 lowercase hex chars

  friend bool operator==(const Pseudonym&, const Pseudonym&) = default;
};

/// First 128 bits of SHA-256(salt ":" identifier), hex encoded.
Pseudonym pseudonymize(std::string_view identifier, std::string_view salt);

}  // namespace ztseg
