#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "helpers.hpp"
#include "ztseg/behavior.hpp"
#include "ztseg/errors.hpp"

using namespace ztseg;
using namespace ztseg::testing;

namespace {

FeatureVector fv_of(const Vec6& v) {
  FeatureVector f;
  f.values = v;
  return f;
}

Vec6 random_vec(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec6 v;
  for (int i = 0; i < 6; ++i) v[i] = n(rng) * (i + 1) + i;
  return v;
}

}  // namespace

TEST_CASE("extract_features") {
  IdentityState empty;
  const auto midnight = make_event("e1", "u1", 1699833600);
  const auto f = extract_features(midnight, empty);
  CHECK(f[0] == doctest::Approx(0.0));
  CHECK(f[1] == doctest::Approx(1.0));
  CHECK(f[2] == 0.0);  // Monday
  CHECK(f[3] == 0.0);
  CHECK(f[4] == 1.0);
  CHECK(f[5] == 1.0);
  CHECK(f.is_valid());

  const auto saturday = make_event("e2", "u1", 1699833600 - 2 * 86400);
  CHECK(extract_features(saturday, empty)[2] == 1.0);
  const auto sunday = make_event("e2", "u1", 1699833600 - 86400 + 3600 * 23);
  CHECK(extract_features(sunday, empty)[2] == 1.0);

  const auto six = make_event("e3", "u1", monday(6));
  CHECK(extract_features(six, empty)[0] == doctest::Approx(1.0));

  IdentityState seen;
  for (int i = 0; i < 4; ++i) seen.observe(make_event("p", "u1", 100 + i, "portal", Action::Login));
  const auto f2 = extract_features(make_event("e4", "u1", monday(10), "portal"), seen);
  CHECK(f2[4] == doctest::Approx(0.2));
  CHECK(f2[5] == doctest::Approx(0.2));
  CHECK(f2[3] == doctest::Approx(0.0));
  const auto far = extract_features(make_event("e5", "u1", monday(10), "r9", Action::Read, kNewYork), seen);
  CHECK(far[3] == doctest::Approx(std::log1p(5570.222179737958)).epsilon(1e-6));
  CHECK(far[5] == 1.0);
}

TEST_CASE("BehaviorBaseline small cases") {
  BehaviorBaseline b("u1");
  Vec6 v;
  v << 1, 2, 3, 4, 5, 6;
  b.update(fv_of(v));
  CHECK(b.n() == 1);
  CHECK(b.mean() == v);
  CHECK(b.covariance().isZero());
  CHECK(b.regularized_covariance().isApprox(Mat6::Identity() * 1e-6));

  BehaviorBaseline two("u1");
  two.update(fv_of(Vec6::Zero()));
  Vec6 x = Vec6::Zero();
  x[0] = 2;
  two = update_baseline(two, fv_of(x));
  CHECK(two.mean()[0] == doctest::Approx(1.0));
  CHECK(two.covariance()(0, 0) == doctest::Approx(2.0));
  CHECK(two.covariance()(1, 1) == 0.0);
}

TEST_CASE("streaming baseline matches two-pass batch") {
  std::mt19937_64 rng(11);
  std::vector<Vec6> xs;
  BehaviorBaseline b("u");
  for (int i = 0; i < 50; ++i) {
    xs.push_back(random_vec(rng));
    b.update(fv_of(xs.back()));
  }
  Vec6 mean = Vec6::Zero();
  for (const auto& x : xs) mean += x;
  mean /= 50.0;
  Mat6 cov = Mat6::Zero();
  for (const auto& x : xs) cov += (x - mean) * (x - mean).transpose();
  cov /= 49.0;
  CHECK((b.mean() - mean).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((b.covariance() - cov).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(b.covariance() == b.covariance().transpose());

  const auto restored = BehaviorBaseline::from_moments("u", b.n(), b.mean(), b.covariance());
  CHECK((restored.covariance() - b.covariance()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("mahalanobis_distance") {
  Vec6 mean = Vec6::Zero();
  Vec6 p = Vec6::Zero();
  CHECK(mahalanobis_distance(p, mean, Mat6::Identity()) == 0.0);
  p << 3, 4, 0, 0, 0, 0;
  CHECK(mahalanobis_distance(p, mean, Mat6::Identity()) == doctest::Approx(5.0));

  Mat6 diag = Mat6::Identity();
  diag(0, 0) = 4;
  p << 2, 1, 0, 0, 0, 0;
  CHECK(mahalanobis_distance(p, mean, diag) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-3));

  Mat6 bad = Mat6::Identity();
  bad(2, 2) = -1;
  CHECK_THROWS_AS(mahalanobis_distance(p, mean, bad), NumericalError);

  // Explicit-inverse oracle on random SPD matrices.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    Mat6 a;
    for (int i = 0; i < 36; ++i) a.data()[i] = n(rng);
    const Mat6 spd = a * a.transpose() + 0.1 * Mat6::Identity();
    const Vec6 x = random_vec(rng), mu = random_vec(rng);
    const double oracle = std::sqrt((x - mu).dot(spd.inverse() * (x - mu)));
    CHECK(std::abs(mahalanobis_distance(x, mu, spd) - oracle) <= 1e-9 * oracle);
  }
}

TEST_CASE("anomaly_score") {
  BehaviorBaseline cold("u");
  auto s = anomaly_score(3.0, cold);
  CHECK(s.score == 0.5);
  CHECK(s.warmup);

  BehaviorBaseline warm("u");
  for (int i = 0; i < 20; ++i) warm.update(fv_of(Vec6::Constant(i)));
  CHECK(anomaly_score(0.0, warm).score == 0.0);
  CHECK_FALSE(anomaly_score(0.0, warm).warmup);
  CHECK(anomaly_score(std::sqrt(12.0), warm).score == doctest::Approx(0.6321205588285577).epsilon(1e-12));
  CHECK(anomaly_score(0.0, warm, 21).warmup);

  double prev = 0.0;
  for (double d = 0.0; d < 20.0; d += 0.01) {
    const double a = anomaly_score(d, warm).score;
    CHECK(a >= prev);
    CHECK(a <= 1.0);
    prev = a;
  }
  CHECK_THROWS_AS(anomaly_score(-1.0, warm), ContractViolation);
  CHECK_THROWS_AS(anomaly_score(std::nan(""), warm), ContractViolation);
}

TEST_CASE("degenerate feature stays positive definite") {
  BehaviorBaseline b("u");
  std::mt19937_64 rng(9);
  for (int i = 0; i < 30; ++i) {
    Vec6 v = random_vec(rng);
    v[2] = 0.0;  // weekend flag never set
    b.update(fv_of(v));
  }
  Vec6 probe = b.mean();
  probe[2] = 1.0;
  const double d = mahalanobis_distance(fv_of(probe), b);
  CHECK(std::isfinite(d));
  CHECK(d == doctest::Approx(1000.0).epsilon(1e-6));
}
