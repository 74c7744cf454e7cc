#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

#include "ztseg/events.hpp"

namespace ztseg {

inline constexpr int kFeatureDims = 6;

using Vec6 = Eigen::Matrix<double, kFeatureDims, 1>;
using Mat6 = Eigen::Matrix<double, kFeatureDims, kFeatureDims>;

/// Behavioral features of one event, in this order:
///   0,1  hour of day on the unit circle (sin, cos)
///   2    weekend flag
///   3    log(1 + km from the centroid of prior login locations)
///   4    device novelty: 1 for an unseen device, else 1 / (1 + times seen)
///   5    resource rarity: 1 / (1 + prior accesses of the resource)
struct FeatureVector {
  Vec6 values = Vec6::Zero();

  double operator[](int i) const { return values[i]; }
  bool is_valid() const;
};

FeatureVector extract_features(const AccessEvent& event, const IdentityState& state);

/// Streaming mean and covariance of an identity's feature vectors.
///
/// Uses the multivariate Welford recurrence, so the stored moments agree with
/// a two-pass batch computation to rounding. `covariance()` is the sample
/// covariance (divisor n - 1) and is the zero matrix while n < 2; distances
/// are always taken against covariance() + epsilon * I.
class BehaviorBaseline {
 public:
  static constexpr double kDefaultEpsilon = 1e-6;

  BehaviorBaseline() = default;
  explicit BehaviorBaseline(std::string identity_id, double epsilon = kDefaultEpsilon);

  /// Rebuilds a baseline from persisted moments.
  static BehaviorBaseline from_moments(std::string identity_id, std::uint64_t n, const Vec6& mean,
                                       const Mat6& covariance, double epsilon = kDefaultEpsilon);

  void update(const FeatureVector& fv);

  const std::string& identity_id() const noexcept { return identity_id_; }
  std::uint64_t n() const noexcept { return n_; }
  const Vec6& mean() const noexcept { return mean_; }
  double epsilon() const noexcept { return epsilon_; }
  Mat6 covariance() const;
  Mat6 regularized_covariance() const;

 private:
  std::string identity_id_;
  std::uint64_t n_ = 0;
  Vec6 mean_ = Vec6::Zero();
  Mat6 scatter_ = Mat6::Zero();  // sum of outer products of deviations
  double epsilon_ = kDefaultEpsilon;
};

/// Functional form of BehaviorBaseline::update.
BehaviorBaseline update_baseline(BehaviorBaseline baseline, const FeatureVector& fv);

/// sqrt(d^T (Sigma + eps I)^-1 d) via a Cholesky solve. Throws NumericalError
/// when the regularized covariance is not positive definite.
double mahalanobis_distance(const FeatureVector& fv, const BehaviorBaseline& baseline);
double mahalanobis_distance(const Vec6& point, const Vec6& mean, const Mat6& covariance);

struct AnomalyScore {
  double distance = 0.0;
  double score = 0.0;  // A in [0, 1]
  bool warmup = false;
};

inline constexpr std::uint64_t kDefaultWarmupThreshold = 20;

/// Maps a distance to A = 1 - exp(-d^2 / 2m), m = 6. Baselines with fewer
/// than `warmup_threshold` observations score a neutral 0.5.
AnomalyScore anomaly_score(double distance, const BehaviorBaseline& baseline,
                           std::uint64_t warmup_threshold = kDefaultWarmupThreshold);

}  // namespace ztseg
