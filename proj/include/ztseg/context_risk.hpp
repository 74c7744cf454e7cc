#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ztseg/events.hpp"

namespace ztseg {

/// IPv4 network in CIDR form, e.g. 203.0.113.0/24.
struct Ipv4Prefix {
  std::uint32_t network = 0;
  int length = 0;

  static Ipv4Prefix parse(std::string_view cidr);  // throws ConfigError
  bool contains(std::uint32_t address) const;
  std::string to_string() const;

  friend bool operator==(const Ipv4Prefix&, const Ipv4Prefix&) = default;
};

std::optional<std::uint32_t> parse_ipv4(std::string_view text);

struct GeoBox {
  double min_lat = 0.0;
  double max_lat = 0.0;
  double min_lon = 0.0;
  double max_lon = 0.0;

  bool contains(const GeoPoint& p) const {
    return p.lat >= min_lat && p.lat <= max_lat && p.lon >= min_lon && p.lon <= max_lon;
  }
  friend bool operator==(const GeoBox&, const GeoBox&) = default;
};

struct ContextFactorWeights {
  double unknown_device = 0.25;
  double unfamiliar_location = 0.25;
  double off_hours = 0.15;
  double untrusted_ip = 0.35;

  friend bool operator==(const ContextFactorWeights&, const ContextFactorWeights&) = default;
};

struct ContextConfig {
  int business_start_hour = 8;  // [start, end) in UTC
  int business_end_hour = 18;
  ContextFactorWeights weights;
  double familiar_radius_km = 500.0;
  std::vector<Ipv4Prefix> blocklist;
  std::vector<GeoBox> blocked_regions;

  void validate() const;  // throws ConfigError
  bool is_business_hour(Timestamp ts) const;
  bool is_blocklisted(std::string_view ip) const;
  bool in_blocked_region(const GeoPoint& p) const;

  friend bool operator==(const ContextConfig&, const ContextConfig&) = default;
};

/// C together with the indicators that produced it.
struct ContextScore {
  double value = 0.0;
  bool saturated = false;  // blocklisted IP or blocked region
  bool unknown_device = false;
  bool unfamiliar_location = false;
  bool off_hours = false;
  bool untrusted_ip = false;

  std::vector<std::string> reason_codes() const;
};

ContextScore contextual_score(const AccessEvent& event, const IdentityState& state,
                              const ContextConfig& config);

/// R = w1 * A + w2 * C. Throws ConfigError unless w1, w2 >= 0 and sum to 1.
double risk_score(double anomaly, double context, double w1, double w2);

struct RiskFactor {
  std::string name;
  double value = 0.0;   // f_i in [0, 1]
  double weight = 0.0;  // w_i >= 0
};

/// R = sum of w_i * f_i over a factor list whose weights sum to 1.
double aggregate_risk(std::span<const RiskFactor> factors);

struct RiskAssessment {
  double anomaly = 0.0;
  double context = 0.0;
  double w1 = 0.5;
  double w2 = 0.5;
  double risk = 0.0;
  std::vector<RiskFactor> factors;
};

enum class Tier { Allow = 0, StepUp = 1, Restrict = 2, Quarantine = 3 };

std::string_view to_string(Tier tier);
std::optional<Tier> parse_tier(std::string_view text);

struct Thresholds {
  double step_up = 0.5;
  double restrict = 0.7;
  double quarantine = 0.85;

  void validate() const;  // throws ConfigError
  bool is_valid() const noexcept;

  friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

struct Decision {
  Tier tier = Tier::Allow;
  std::vector<std::string> reasons;
  double risk = 0.0;
};

namespace reason {
inline constexpr std::string_view kQuarantined = "quarantined";
inline constexpr std::string_view kRiskAboveStepUp = "risk_above_step_up";
inline constexpr std::string_view kRiskAboveRestrict = "risk_above_restrict";
inline constexpr std::string_view kRiskAboveQuarantine = "risk_above_quarantine";
inline constexpr std::string_view kImpossibleTravel = "impossible_travel";
inline constexpr std::string_view kBlocklisted = "blocklisted_source";
inline constexpr std::string_view kUnknownDevice = "unknown_device";
inline constexpr std::string_view kUnfamiliarLocation = "unfamiliar_location";
inline constexpr std::string_view kOffHours = "off_hours";
inline constexpr std::string_view kUntrustedIp = "untrusted_ip";
inline constexpr std::string_view kBehaviorWarmup = "behavior_warmup";
}  // namespace reason

/// Tiered threshold rule. Crossing a threshold requires R strictly above it;
/// a quarantined identity stays in Quarantine.
Decision decide(double risk, const Thresholds& thresholds, bool quarantined);

}  // namespace ztseg
