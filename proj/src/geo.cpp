#include "ztseg/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ztseg {

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  constexpr double kDegToRad = std::numbers::pi / 180.0;
  const double lat1 = a.lat * kDegToRad;
  const double lat2 = b.lat * kDegToRad;
  const double dlat = lat2 - lat1;
  const double dlon = (b.lon - a.lon) * kDegToRad;
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  const double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(std::clamp(h, 0.0, 1.0)));
}

}  // namespace ztseg
