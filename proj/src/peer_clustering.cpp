#include "ztseg/peer_clustering.hpp"

#include <cmath>
#include <random>

#include "ztseg/errors.hpp"

namespace ztseg {

namespace {

constexpr int kMaxIterations = 100;

double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<Vec6> seed_centroids(std::span<const Vec6> points, int k, std::mt19937_64& rng) {
  const std::size_t n = points.size();
  std::vector<Vec6> centroids;
  centroids.reserve(static_cast<std::size_t>(k));
  std::vector<bool> chosen(n, false);

  std::size_t first = std::min(static_cast<std::size_t>(unit_draw(rng) * static_cast<double>(n)), n - 1);
  centroids.push_back(points[first]);
  chosen[first] = true;

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = (points[i] - points[first]).squaredNorm();

  while (static_cast<int>(centroids.size()) < k) {
    double total = 0.0;
    for (double x : d2) total += x;
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = unit_draw(rng) * total;
      double cumulative = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        cumulative += d2[i];
        pick = i;
        if (cumulative > target) break;
      }
    } else {
      // Every remaining point coincides with a centroid.
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) {
          pick = i;
          break;
        }
      }
    }
    centroids.push_back(points[pick]);
    chosen[pick] = true;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points[i] - points[pick]).squaredNorm());
    }
  }
  return centroids;
}

std::vector<int> assign(std::span<const Vec6> points, std::span<const Vec6> centroids) {
  std::vector<int> labels(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) labels[i] = nearest_centroid(points[i], centroids);
  return labels;
}

// Cluster means; empty clusters are reseeded to the point farthest from its
// assigned centroid (ties to the lowest point index, no point used twice).
std::vector<Vec6> update_centroids(std::span<const Vec6> points, std::span<const Vec6> centroids,
                                   std::span<const int> labels) {
  const std::size_t k = centroids.size();
  std::vector<Vec6> sums(k, Vec6::Zero());
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    sums[c] += points[i];
    ++counts[c];
  }
  std::vector<Vec6> next(k);
  std::vector<bool> used(points.size(), false);
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] > 0) {
      next[c] = sums[c] / static_cast<double>(counts[c]);
      continue;
    }
    std::size_t farthest = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (used[i]) continue;
      const double d = (points[i] - centroids[static_cast<std::size_t>(labels[i])]).squaredNorm();
      if (d > best) {
        best = d;
        farthest = i;
      }
    }
    used[farthest] = true;
    next[c] = points[farthest];
  }
  return next;
}

std::vector<Vec6> cluster_means(std::span<const Vec6> points, std::span<const int> labels,
                                std::span<const std::size_t> counts) {
  std::vector<Vec6> sums(counts.size(), Vec6::Zero());
  for (std::size_t i = 0; i < points.size(); ++i) sums[static_cast<std::size_t>(labels[i])] += points[i];
  for (std::size_t c = 0; c < counts.size(); ++c) sums[c] /= static_cast<double>(counts[c]);
  return sums;
}

// One sweep of single-point moves. Moving x from a to b changes the inertia
// by n_b/(n_b+1)|x-c_b|^2 - n_a/(n_a-1)|x-c_a|^2; a point moves when that is
// negative beyond rounding. Expects no empty cluster and leaves centroids at
// the cluster means. Returns whether anything moved.
bool hartigan_pass(std::span<const Vec6> points, std::vector<Vec6>& centroids, std::vector<int>& labels) {
  const std::size_t k = centroids.size();
  std::vector<std::size_t> counts(k, 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  double scale = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    scale += (points[i] - centroids[static_cast<std::size_t>(labels[i])]).squaredNorm();
  }
  const double tol = 1e-12 * (1.0 + scale);
  bool moved = false;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto a = static_cast<std::size_t>(labels[i]);
    if (counts[a] < 2) continue;
    const double na = static_cast<double>(counts[a]);
    const double removal = na / (na - 1.0) * (points[i] - centroids[a]).squaredNorm();
    std::size_t best = a;
    double best_delta = -tol;
    for (std::size_t b = 0; b < k; ++b) {
      if (b == a) continue;
      const double nb = static_cast<double>(counts[b]);
      const double delta = nb / (nb + 1.0) * (points[i] - centroids[b]).squaredNorm() - removal;
      if (delta < best_delta) {
        best_delta = delta;
        best = b;
      }
    }
    if (best == a) continue;
    labels[i] = static_cast<int>(best);
    --counts[a];
    ++counts[best];
    centroids = cluster_means(points, labels, counts);
    moved = true;
  }
  return moved;
}

bool has_empty_cluster(std::span<const int> labels, int k) {
  std::vector<bool> seen(static_cast<std::size_t>(k), false);
  for (int l : labels) seen[static_cast<std::size_t>(l)] = true;
  for (bool s : seen) {
    if (!s) return true;
  }
  return false;
}

}  // namespace

int nearest_centroid(const Vec6& point, std::span<const Vec6> centroids) {
  int best = 0;
  double best_d = (point - centroids[0]).squaredNorm();
  for (std::size_t c = 1; c < centroids.size(); ++c) {
    const double d = (point - centroids[c]).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

double compute_inertia(std::span<const Vec6> points, std::span<const Vec6> centroids,
                       std::span<const int> labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    total += (points[i] - centroids[static_cast<std::size_t>(labels[i])]).squaredNorm();
  }
  return total;
}

ClusterModel kmeans(std::span<const Vec6> points, int k, std::uint64_t seed) {
  if (k < 1 || static_cast<std::size_t>(k) > points.size()) {
    throw ArgumentError("k must satisfy 1 <= k <= number of points");
  }
  std::mt19937_64 rng(seed);

  ClusterModel model;
  model.k = k;
  model.seed = seed;
  model.centroids = seed_centroids(points, k, rng);
  model.labels = assign(points, model.centroids);
  model.inertia_trace.push_back(compute_inertia(points, model.centroids, model.labels));

  int lloyd_steps = 0;
  auto lloyd = [&] {
    while (lloyd_steps < kMaxIterations) {
      ++lloyd_steps;
      model.centroids = update_centroids(points, model.centroids, model.labels);
      auto labels = assign(points, model.centroids);
      const bool stable = labels == model.labels;
      model.labels = std::move(labels);
      model.inertia_trace.push_back(compute_inertia(points, model.centroids, model.labels));
      // A stable assignment means the centroids already are its means, so the
      // next update would move nothing.
      if (stable && !has_empty_cluster(model.labels, k)) return true;
    }
    return false;
  };

  // Lloyd to a fixed point, then single-point (Hartigan) moves that lower the
  // inertia once centroids follow the move; repeat until neither changes.
  for (int round = 0; round < kMaxIterations; ++round) {
    if (!lloyd()) break;
    if (!hartigan_pass(points, model.centroids, model.labels)) break;
    model.inertia_trace.push_back(compute_inertia(points, model.centroids, model.labels));
  }
  model.iterations = lloyd_steps;
  model.inertia = compute_inertia(points, model.centroids, model.labels);
  return model;
}

ClusterModel cluster_identities(const std::map<std::string, BehaviorBaseline>& baselines, int k,
                                std::uint64_t seed) {
  std::vector<Vec6> points;
  std::vector<std::string> ids;
  points.reserve(baselines.size());
  for (const auto& [id, baseline] : baselines) {
    ids.push_back(id);
    points.push_back(baseline.mean());
  }
  auto model = kmeans(points, k, seed);
  for (std::size_t i = 0; i < ids.size(); ++i) model.assignments[ids[i]] = model.labels[i];
  return model;
}

double peer_deviation(const Vec6& identity_mean, const ClusterModel& model) {
  if (model.centroids.empty()) throw ArgumentError("cluster model has no centroids");
  const int c = nearest_centroid(identity_mean, model.centroids);
  const double d2 = (identity_mean - model.centroids[static_cast<std::size_t>(c)]).squaredNorm();
  return -std::expm1(-d2 / 2.0);
}

}  // namespace ztseg
