#include "ztseg/context_risk.hpp"

#include <array>
#include <charconv>
#include <cmath>

#include "ztseg/errors.hpp"

namespace ztseg {

namespace {

constexpr double kWeightTolerance = 1e-9;

bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace

std::optional<std::uint32_t> parse_ipv4(std::string_view text) {
  if (!is_ipv4(text)) return std::nullopt;
  std::uint32_t address = 0;
  std::size_t pos = 0;
  for (int i = 0; i < 4; ++i) {
    const auto dot = text.find('.', pos);
    const auto part = text.substr(pos, dot == std::string_view::npos ? text.npos : dot - pos);
    unsigned octet = 0;
    std::from_chars(part.data(), part.data() + part.size(), octet);
    address = (address << 8) | octet;
    pos = dot + 1;
  }
  return address;
}

Ipv4Prefix Ipv4Prefix::parse(std::string_view cidr) {
  const auto slash = cidr.find('/');
  const auto addr_text = cidr.substr(0, slash);
  const auto address = parse_ipv4(addr_text);
  if (!address) throw ConfigError("bad IPv4 prefix \"" + std::string(cidr) + "\"");
  int length = 32;
  if (slash != std::string_view::npos) {
    const auto len_text = cidr.substr(slash + 1);
    const auto [ptr, ec] =
        std::from_chars(len_text.data(), len_text.data() + len_text.size(), length);
    if (len_text.empty() || ec != std::errc{} || ptr != len_text.data() + len_text.size() ||
        length < 0 || length > 32) {
      throw ConfigError("bad IPv4 prefix length in \"" + std::string(cidr) + "\"");
    }
  }
  const std::uint32_t mask = length == 0 ? 0u : ~std::uint32_t{0} << (32 - length);
  return {*address & mask, length};
}

bool Ipv4Prefix::contains(std::uint32_t address) const {
  const std::uint32_t mask = length == 0 ? 0u : ~std::uint32_t{0} << (32 - length);
  return (address & mask) == network;
}

std::string Ipv4Prefix::to_string() const {
  return std::to_string(network >> 24) + "." + std::to_string((network >> 16) & 0xff) + "." +
         std::to_string((network >> 8) & 0xff) + "." + std::to_string(network & 0xff) + "/" +
         std::to_string(length);
}

void ContextConfig::validate() const {
  if (!(0 <= business_start_hour && business_start_hour < business_end_hour &&
        business_end_hour <= 24)) {
    throw ConfigError("business hours must satisfy 0 <= start < end <= 24");
  }
  const std::array<double, 4> w = {weights.unknown_device, weights.unfamiliar_location,
                                   weights.off_hours, weights.untrusted_ip};
  double sum = 0.0;
  for (double x : w) {
    if (!(x >= 0.0)) throw ConfigError("context factor weights must be non-negative");
    sum += x;
  }
  if (std::abs(sum - 1.0) > kWeightTolerance) {
    throw ConfigError("context factor weights must sum to 1");
  }
  if (!(familiar_radius_km >= 0.0)) throw ConfigError("familiar radius must be non-negative");
  for (const auto& box : blocked_regions) {
    if (!(box.min_lat <= box.max_lat && box.min_lon <= box.max_lon)) {
      throw ConfigError("blocked region box has inverted bounds");
    }
  }
}

bool ContextConfig::is_business_hour(Timestamp ts) const {
  const std::int64_t second_of_day = ((ts % 86400) + 86400) % 86400;
  const auto hour = static_cast<int>(second_of_day / 3600);
  return hour >= business_start_hour && hour < business_end_hour;
}

bool ContextConfig::is_blocklisted(std::string_view ip) const {
  const auto address = parse_ipv4(ip);
  if (!address) return false;
  for (const auto& prefix : blocklist) {
    if (prefix.contains(*address)) return true;
  }
  return false;
}

bool ContextConfig::in_blocked_region(const GeoPoint& p) const {
  for (const auto& box : blocked_regions) {
    if (box.contains(p)) return true;
  }
  return false;
}

std::vector<std::string> ContextScore::reason_codes() const {
  std::vector<std::string> out;
  if (saturated) out.emplace_back(reason::kBlocklisted);
  if (unknown_device) out.emplace_back(reason::kUnknownDevice);
  if (unfamiliar_location) out.emplace_back(reason::kUnfamiliarLocation);
  if (off_hours) out.emplace_back(reason::kOffHours);
  if (untrusted_ip) out.emplace_back(reason::kUntrustedIp);
  return out;
}

ContextScore contextual_score(const AccessEvent& event, const IdentityState& state,
                              const ContextConfig& config) {
  ContextScore s;
  // Like location, a device only counts as unknown once there is a history.
  s.unknown_device = !state.known_devices.empty() && !state.knows_device(event.device_id);
  if (!state.login_locations.empty()) {
    s.unfamiliar_location = true;
    for (const auto& loc : state.login_locations) {
      if (haversine_km(event.geo, loc.geo) <= config.familiar_radius_km) {
        s.unfamiliar_location = false;
        break;
      }
    }
  }
  s.off_hours = !config.is_business_hour(event.timestamp);
  // Reserved for soft threat-intel matches; no soft feed is wired in.
  s.untrusted_ip = false;

  if (config.is_blocklisted(event.source_ip) || config.in_blocked_region(event.geo)) {
    s.saturated = true;
    s.value = 1.0;
    return s;
  }
  const auto& w = config.weights;
  double c = 0.0;
  if (s.unknown_device) c += w.unknown_device;
  if (s.unfamiliar_location) c += w.unfamiliar_location;
  if (s.off_hours) c += w.off_hours;
  if (s.untrusted_ip) c += w.untrusted_ip;
  s.value = std::min(c, 1.0);
  return s;
}

double risk_score(double anomaly, double context, double w1, double w2) {
  if (!(w1 >= 0.0 && w2 >= 0.0) || std::abs(w1 + w2 - 1.0) > kWeightTolerance) {
    throw ConfigError("risk weights must be non-negative and sum to 1");
  }
  if (!in_unit(anomaly) || !in_unit(context)) {
    throw ContractViolation("risk inputs A and C must lie in [0, 1]");
  }
  double r = 0.0;
  r += w1 * anomaly;
  r += w2 * context;
  return r;
}

double aggregate_risk(std::span<const RiskFactor> factors) {
  double weight_sum = 0.0;
  for (const auto& f : factors) {
    if (!(f.weight >= 0.0)) throw ConfigError("factor weights must be non-negative");
    if (!in_unit(f.value)) throw ContractViolation("factor values must lie in [0, 1]");
    weight_sum += f.weight;
  }
  if (std::abs(weight_sum - 1.0) > kWeightTolerance) {
    throw ConfigError("factor weights must sum to 1");
  }
  // Same accumulation order as risk_score so the two-factor case is bit-identical.
  double r = 0.0;
  for (const auto& f : factors) r += f.weight * f.value;
  return r;
}

std::string_view to_string(Tier tier) {
  switch (tier) {
    case Tier::Allow: return "Allow";
    case Tier::StepUp: return "StepUp";
    case Tier::Restrict: return "Restrict";
    case Tier::Quarantine: return "Quarantine";
  }
  return "Allow";
}

std::optional<Tier> parse_tier(std::string_view text) {
  for (Tier t : {Tier::Allow, Tier::StepUp, Tier::Restrict, Tier::Quarantine}) {
    if (to_string(t) == text) return t;
  }
  return std::nullopt;
}

bool Thresholds::is_valid() const noexcept {
  return 0.0 < step_up && step_up < restrict && restrict < quarantine && quarantine < 1.0;
}

void Thresholds::validate() const {
  if (!is_valid()) throw ConfigError("thresholds must satisfy 0 < step_up < restrict < quarantine < 1");
}

Decision decide(double risk, const Thresholds& thresholds, bool quarantined) {
  Decision d;
  d.risk = risk;
  if (quarantined) {
    d.tier = Tier::Quarantine;
    d.reasons.emplace_back(reason::kQuarantined);
  } else if (risk > thresholds.quarantine) {
    d.tier = Tier::Quarantine;
    d.reasons.emplace_back(reason::kRiskAboveQuarantine);
  } else if (risk > thresholds.restrict) {
    d.tier = Tier::Restrict;
    d.reasons.emplace_back(reason::kRiskAboveRestrict);
  } else if (risk > thresholds.step_up) {
    d.tier = Tier::StepUp;
    d.reasons.emplace_back(reason::kRiskAboveStepUp);
  }
  return d;
}

}  // namespace ztseg
