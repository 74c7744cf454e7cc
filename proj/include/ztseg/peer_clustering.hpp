#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ztseg/behavior.hpp"

namespace ztseg {

struct ClusterModel {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<Vec6> centroids;
  std::vector<int> labels;                 // per input point
  std::map<std::string, int> assignments;  // identity -> cluster, when clustered by identity
  double inertia = 0.0;
  int iterations = 0;
  std::vector<double> inertia_trace;  // inertia after each assignment step
};

/// Lloyd's algorithm with k-means++ seeding. Deterministic in (points, k, seed):
/// ties go to the lowest centroid index, and the generator draws are mapped to
/// doubles by hand rather than through <random> distributions. Iterates until
/// the assignment is stable with no empty cluster, i.e. the next update would
/// move no centroid at all, capped at 100 iterations. A converged partition is
/// then polished with single-point moves that lower the inertia, followed by
/// Lloyd again, so the result is stable under both. Throws ArgumentError
/// unless 1 <= k <= n.
ClusterModel kmeans(std::span<const Vec6> points, int k, std::uint64_t seed);

/// Clusters per-identity baseline means; fills `assignments`.
ClusterModel cluster_identities(const std::map<std::string, BehaviorBaseline>& baselines, int k,
                                std::uint64_t seed);

/// Index of the nearest centroid, ties to the lowest index.
int nearest_centroid(const Vec6& point, std::span<const Vec6> centroids);

/// Sum of squared distances of each point to its labelled centroid.
double compute_inertia(std::span<const Vec6> points, std::span<const Vec6> centroids,
                       std::span<const int> labels);

/// 1 - exp(-d^2 / 2) for d the distance to the nearest centroid.
double peer_deviation(const Vec6& identity_mean, const ClusterModel& model);

}  // namespace ztseg
