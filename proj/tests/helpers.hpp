#pragma once

#include <string>

#include "ztseg/events.hpp"

namespace ztseg::testing {

inline constexpr GeoPoint kLondon{51.5074, -0.1278};
inline constexpr GeoPoint kNewYork{40.7128, -74.0060};

// 2023-11-13 (a Monday) at the given UTC hour.
inline Timestamp monday(int hour, int minute = 0) { return 1699833600 + hour * 3600 + minute * 60; }

inline AccessEvent make_event(std::string id, std::string identity, Timestamp ts,
                              std::string resource = "r1", Action action = Action::Read,
                              GeoPoint geo = kLondon, std::string device = "d1",
                              std::string ip = "10.0.0.1", bool success = true) {
  AccessEvent e;
  e.event_id = std::move(id);
  e.identity_id = std::move(identity);
  e.timestamp = ts;
  e.resource_id = std::move(resource);
  e.action = action;
  e.geo = geo;
  e.device_id = std::move(device);
  e.source_ip = std::move(ip);
  e.success = success;
  return e;
}

}  // namespace ztseg::testing
