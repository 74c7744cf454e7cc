#include "ztseg/behavior.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>

#include "ztseg/errors.hpp"

namespace ztseg {

namespace {

constexpr std::int64_t kSecondsPerDay = 86400;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

bool FeatureVector::is_valid() const {
  if (!values.allFinite()) return false;
  const auto in = [](double x, double lo, double hi) { return x >= lo && x <= hi; };
  return in(values[0], -1, 1) && in(values[1], -1, 1) && in(values[2], 0, 1) &&
         values[3] >= 0 && in(values[4], 0, 1) && in(values[5], 0, 1);
}

FeatureVector extract_features(const AccessEvent& event, const IdentityState& state) {
  const std::int64_t day = floor_div(event.timestamp, kSecondsPerDay);
  const std::int64_t second_of_day = event.timestamp - day * kSecondsPerDay;
  const double hour = static_cast<double>(second_of_day) / 3600.0;
  const double angle = 2.0 * std::numbers::pi * hour / 24.0;
  // 1970-01-01 was a Thursday; weekday 0 is Sunday.
  const std::int64_t weekday = ((day + 4) % 7 + 7) % 7;

  double geo_component = 0.0;
  if (!state.login_locations.empty()) {
    GeoPoint centroid{0.0, 0.0};
    for (const auto& loc : state.login_locations) {
      centroid.lat += loc.geo.lat;
      centroid.lon += loc.geo.lon;
    }
    const auto count = static_cast<double>(state.login_locations.size());
    centroid.lat /= count;
    centroid.lon /= count;
    geo_component = std::log1p(haversine_km(event.geo, centroid));
  }

  const auto seen = state.device_count(event.device_id);
  const double novelty = seen == 0 ? 1.0 : 1.0 / (1.0 + static_cast<double>(seen));
  const double rarity =
      1.0 / (1.0 + static_cast<double>(state.resource_count(event.resource_id)));

  FeatureVector fv;
  fv.values << std::sin(angle), std::cos(angle), (weekday == 0 || weekday == 6) ? 1.0 : 0.0,
      geo_component, novelty, rarity;
  return fv;
}

BehaviorBaseline::BehaviorBaseline(std::string identity_id, double epsilon)
    : identity_id_(std::move(identity_id)), epsilon_(epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("baseline epsilon must be positive");
}

BehaviorBaseline BehaviorBaseline::from_moments(std::string identity_id, std::uint64_t n,
                                                const Vec6& mean, const Mat6& covariance,
                                                double epsilon) {
  BehaviorBaseline b(std::move(identity_id), epsilon);
  b.n_ = n;
  b.mean_ = n == 0 ? Vec6::Zero() : mean;
  if (n >= 2) {
    const Mat6 sym = 0.5 * (covariance + covariance.transpose());
    b.scatter_ = sym * static_cast<double>(n - 1);
  }
  return b;
}

void BehaviorBaseline::update(const FeatureVector& fv) {
  ++n_;
  const Vec6 delta = fv.values - mean_;
  const double n = static_cast<double>(n_);
  mean_ += delta / n;
  // (n-1)/n * delta delta^T keeps the scatter matrix exactly symmetric.
  // Eigen would fold the scalar into one factor of the product, so form the
  // outer product first.
  const Mat6 outer = delta * delta.transpose();
  scatter_ += ((n - 1.0) / n) * outer;
}

Mat6 BehaviorBaseline::covariance() const {
  if (n_ < 2) return Mat6::Zero();
  return scatter_ / static_cast<double>(n_ - 1);
}

Mat6 BehaviorBaseline::regularized_covariance() const {
  Mat6 cov = covariance();
  cov.diagonal().array() += epsilon_;
  return cov;
}

BehaviorBaseline update_baseline(BehaviorBaseline baseline, const FeatureVector& fv) {
  baseline.update(fv);
  return baseline;
}

double mahalanobis_distance(const Vec6& point, const Vec6& mean, const Mat6& covariance) {
  const Eigen::LLT<Mat6> llt(covariance);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("covariance is not positive definite; baseline is corrupted");
  }
  const Vec6 z = llt.matrixL().solve(point - mean);
  const double d2 = z.squaredNorm();
  if (!std::isfinite(d2)) throw NumericalError("non-finite Mahalanobis distance");
  return std::sqrt(d2);
}

double mahalanobis_distance(const FeatureVector& fv, const BehaviorBaseline& baseline) {
  return mahalanobis_distance(fv.values, baseline.mean(), baseline.regularized_covariance());
}

AnomalyScore anomaly_score(double distance, const BehaviorBaseline& baseline,
                           std::uint64_t warmup_threshold) {
  if (!(distance >= 0.0)) throw ContractViolation("anomaly distance must be non-negative");
  if (baseline.n() < warmup_threshold) return {distance, 0.5, true};
  const double m = static_cast<double>(kFeatureDims);
  return {distance, -std::expm1(-distance * distance / (2.0 * m)), false};
}

}  // namespace ztseg
