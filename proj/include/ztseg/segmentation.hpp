#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ztseg/events.hpp"

namespace ztseg {

struct EdgeState {
  std::uint64_t access_count = 0;
  Timestamp last_timestamp = 0;
  bool active = true;

  friend bool operator==(const EdgeState&, const EdgeState&) = default;
};

using EdgeKey = std::pair<std::string, std::string>;  // (identity_id, resource_id)

/// Edges deactivated by one quarantine call.
struct ContainmentRecord {
  std::string identity_id;
  Timestamp timestamp = 0;
  std::vector<std::string> deactivated;  // resource ids, sorted
};

/// Bipartite identity/resource access graph. Edges are deactivated, never
/// deleted. Mutations are not synchronized; callers serialize them.
class AccessGraph {
 public:
  /// Adds or bumps the (identity, resource) edge. Edges of a quarantined
  /// identity are recorded inactive.
  void record_access(const AccessEvent& event);
  void record_access(const std::string& identity_id, const std::string& resource_id,
                     Timestamp timestamp);

  /// Severs every active edge of the identity. Idempotent: a second call
  /// deactivates nothing and returns an empty list.
  ContainmentRecord quarantine(const std::string& identity_id, Timestamp timestamp);

  /// Reactivates the edges the quarantine severed. Throws StateError if the
  /// identity is not quarantined.
  void release(const std::string& identity_id);

  /// Resources one hop away over active edges.
  std::set<std::string> blast_radius(const std::string& identity_id) const;

  bool is_quarantined(const std::string& identity_id) const {
    return quarantine_.contains(identity_id);
  }
  bool has_identity(const std::string& id) const { return identities_.contains(id); }
  bool has_resource(const std::string& id) const { return resources_.contains(id); }

  const std::set<std::string>& identities() const noexcept { return identities_; }
  const std::set<std::string>& resources() const noexcept { return resources_; }
  const std::map<EdgeKey, EdgeState>& edges() const noexcept { return edges_; }
  const EdgeState* edge(const std::string& identity_id, const std::string& resource_id) const;

  /// Checks bipartiteness, the quarantine invariant and access_count >= 1.
  bool check_invariants() const;

  /// Snapshot with every identifier pseudonymized under `salt`.
  nlohmann::ordered_json snapshot(const std::string& salt) const;

 private:
  struct QuarantineEntry {
    Timestamp since = 0;
    std::vector<std::string> severed;
  };

  std::set<std::string> identities_;
  std::set<std::string> resources_;
  std::map<EdgeKey, EdgeState> edges_;
  std::map<std::string, QuarantineEntry> quarantine_;
};

struct TravelCheck {
  double speed_kmh = 0.0;
  double distance_km = 0.0;
  std::int64_t elapsed_s = 0;
  bool flagged = false;
};

inline constexpr double kDefaultMaxSpeedKmh = 900.0;
inline constexpr double kDefaultMinDistanceKm = 100.0;

/// Compares the event with the identity's most recent prior login. Flags when
/// the hop is longer than `min_distance_km` and faster than `max_speed_kmh`;
/// a zero elapsed time reports an infinite speed.
TravelCheck detect_impossible_travel(const IdentityState& state, const AccessEvent& event,
                                     double max_speed_kmh = kDefaultMaxSpeedKmh,
                                     double min_distance_km = kDefaultMinDistanceKm);

}  // namespace ztseg
