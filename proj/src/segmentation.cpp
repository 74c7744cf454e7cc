#include "ztseg/segmentation.hpp"

#include <algorithm>
#include <limits>

#include "ztseg/errors.hpp"

namespace ztseg {

void AccessGraph::record_access(const AccessEvent& event) {
  record_access(event.identity_id, event.resource_id, event.timestamp);
}

void AccessGraph::record_access(const std::string& identity_id, const std::string& resource_id,
                                Timestamp timestamp) {
  identities_.insert(identity_id);
  resources_.insert(resource_id);
  auto [it, inserted] = edges_.try_emplace(EdgeKey{identity_id, resource_id});
  auto& edge = it->second;
  ++edge.access_count;
  edge.last_timestamp = std::max(edge.last_timestamp, timestamp);
  if (inserted) edge.active = !is_quarantined(identity_id);
}

ContainmentRecord AccessGraph::quarantine(const std::string& identity_id, Timestamp timestamp) {
  identities_.insert(identity_id);
  ContainmentRecord record{identity_id, timestamp, {}};
  auto [entry, inserted] = quarantine_.try_emplace(identity_id);
  if (!inserted) return record;
  entry->second.since = timestamp;

  auto it = edges_.lower_bound(EdgeKey{identity_id, std::string{}});
  for (; it != edges_.end() && it->first.first == identity_id; ++it) {
    if (!it->second.active) continue;
    it->second.active = false;
    record.deactivated.push_back(it->first.second);
  }
  entry->second.severed = record.deactivated;
  return record;
}

void AccessGraph::release(const std::string& identity_id) {
  const auto entry = quarantine_.find(identity_id);
  if (entry == quarantine_.end()) {
    throw StateError("identity \"" + identity_id + "\" is not quarantined");
  }
  for (const auto& resource : entry->second.severed) {
    edges_.at(EdgeKey{identity_id, resource}).active = true;
  }
  quarantine_.erase(entry);
}

std::set<std::string> AccessGraph::blast_radius(const std::string& identity_id) const {
  std::set<std::string> out;
  auto it = edges_.lower_bound(EdgeKey{identity_id, std::string{}});
  for (; it != edges_.end() && it->first.first == identity_id; ++it) {
    if (it->second.active) out.insert(it->first.second);
  }
  return out;
}

const EdgeState* AccessGraph::edge(const std::string& identity_id,
                                   const std::string& resource_id) const {
  const auto it = edges_.find(EdgeKey{identity_id, resource_id});
  return it == edges_.end() ? nullptr : &it->second;
}

bool AccessGraph::check_invariants() const {
  for (const auto& [key, edge] : edges_) {
    if (!identities_.contains(key.first) || !resources_.contains(key.second)) return false;
    if (edge.access_count < 1) return false;
    if (edge.active && is_quarantined(key.first)) return false;
  }
  for (const auto& [id, entry] : quarantine_) {
    if (!identities_.contains(id)) return false;
  }
  return true;
}

nlohmann::ordered_json AccessGraph::snapshot(const std::string& salt) const {
  auto token = [&](const std::string& id) { return pseudonymize(id, salt).token; };
  nlohmann::ordered_json out;
  auto& ids = out["identities"] = nlohmann::ordered_json::array();
  for (const auto& id : identities_) ids.push_back(token(id));
  auto& res = out["resources"] = nlohmann::ordered_json::array();
  for (const auto& r : resources_) res.push_back(token(r));
  auto& edges = out["edges"] = nlohmann::ordered_json::array();
  for (const auto& [key, edge] : edges_) {
    nlohmann::ordered_json e;
    e["identity"] = token(key.first);
    e["resource"] = token(key.second);
    e["access_count"] = edge.access_count;
    e["last_timestamp"] = edge.last_timestamp;
    e["active"] = edge.active;
    edges.push_back(std::move(e));
  }
  auto& q = out["quarantine"] = nlohmann::ordered_json::array();
  for (const auto& [id, entry] : quarantine_) {
    nlohmann::ordered_json e;
    e["identity"] = token(id);
    e["since"] = entry.since;
    q.push_back(std::move(e));
  }
  return out;
}

TravelCheck detect_impossible_travel(const IdentityState& state, const AccessEvent& event,
                                     double max_speed_kmh, double min_distance_km) {
  TravelCheck check;
  if (state.login_locations.empty()) return check;
  const auto& prior = state.login_locations.back();
  check.distance_km = haversine_km(prior.geo, event.geo);
  check.elapsed_s = std::max<std::int64_t>(0, event.timestamp - prior.timestamp);
  if (check.elapsed_s == 0) {
    check.speed_kmh = check.distance_km > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  } else {
    check.speed_kmh = check.distance_km / (static_cast<double>(check.elapsed_s) / 3600.0);
  }
  check.flagged = check.distance_km > min_distance_km && check.speed_kmh > max_speed_kmh;
  return check;
}

}  // namespace ztseg
