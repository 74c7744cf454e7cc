#pragma once

namespace ztseg {

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

inline constexpr double kEarthRadiusKm = 6371.0;

/// Great-circle distance in kilometres.
double haversine_km(const GeoPoint& a, const GeoPoint& b);

}  // namespace ztseg
