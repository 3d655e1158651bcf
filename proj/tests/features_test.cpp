#include <random>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace sandro {
namespace {

PointCloud sphere_cloud(std::mt19937_64& rng, std::size_t n, double radius = 1.0) {
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.push_back(radius * random_unit_vector(rng));
  return c;
}

TEST(EstimateNormals, PlaneGivesAxisNormal) {
  PointCloud c;
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) c.points.emplace_back(0.1 * i, 0.1 * j, 2.0);
  }
  c.points.emplace_back(0.45, 0.45, 0.0);  // pulls the centroid below the plane
  const PointCloud out = estimate_normals(c, 0.25);
  for (std::size_t i = 0; i < 100; ++i) {
    ASSERT_TRUE(out.normal_valid(i));
    EXPECT_NEAR(out.normals[i].z(), 1.0, 1e-9);
  }
}

TEST(EstimateNormals, SphereNormalsPointOutward) {
  std::mt19937_64 rng(4);
  const PointCloud c = sphere_cloud(rng, 3000);
  const PointCloud out = estimate_normals(c, 0.15);
  int valid = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!out.normal_valid(i)) continue;
    ++valid;
    EXPECT_GT(out.normals[i].dot(c.points[i]), 0.97);
  }
  EXPECT_GT(valid, 2900);
}

TEST(EstimateNormals, IsolatedPointIsMarkedInvalid) {
  PointCloud c;
  c.points = {Point3(0, 0, 0), Point3(0.01, 0, 0), Point3(0, 0.01, 0), Point3(10, 10, 10)};
  const PointCloud out = estimate_normals(c, 0.05);
  EXPECT_TRUE(out.normal_valid(0));
  EXPECT_FALSE(out.normal_valid(3));
  EXPECT_EQ(out.normals[3], Point3::Zero());
  EXPECT_THROW(estimate_normals(c, 0.0), Error);
}

TEST(Fpfh, TwoPointConfigurationFallsInCentreBins) {
  PointCloud c;
  c.points = {Point3(0, 0, 0), Point3(1, 0, 0)};
  c.normals = {Point3(0, 0, 1), Point3(0, 0, 1)};
  const auto d = compute_fpfh(c, 1.5);
  for (const auto& h : d) {
    for (std::size_t b = 0; b < kFpfhSize; ++b) {
      EXPECT_DOUBLE_EQ(h[b], b % kFpfhBins == 5 ? 100.0 : 0.0) << "bin " << b;
    }
  }
}

TEST(Fpfh, NormalAlongConnectingLineIsSkipped) {
  PointCloud c;
  c.points = {Point3(0, 0, 0), Point3(1, 0, 0)};
  c.normals = {Point3(1, 0, 0), Point3(1, 0, 0)};
  for (const auto& h : compute_fpfh(c, 1.5)) EXPECT_TRUE(detail::all_zero(h));
}

TEST(Fpfh, PairFeaturesAnchorOnMoreAlignedNormal) {
  detail::PairFeatures f{}, g{};
  const Point3 p1(0, 0, 0), p2(1, 0.2, 0.1);
  const Point3 n1 = Point3(0.9, 0.1, 0.4).normalized();
  const Point3 n2 = Point3(0.1, 0.2, 1.0).normalized();
  ASSERT_TRUE(detail::pair_features(p1, n1, p2, n2, f));
  ASSERT_TRUE(detail::pair_features(p2, n2, p1, n1, g));
  EXPECT_DOUBLE_EQ(f.alpha, g.alpha);
  EXPECT_DOUBLE_EQ(f.phi, g.phi);
  EXPECT_DOUBLE_EQ(f.theta, g.theta);
  EXPECT_NEAR(f.phi, n1.dot((p2 - p1).normalized()), 1e-15);
}

TEST(Fpfh, BinsCoverTheRangeEvenly) {
  EXPECT_EQ(detail::bin_of(-1.0, -1.0, 1.0), 0u);
  EXPECT_EQ(detail::bin_of(1.0, -1.0, 1.0), 10u);
  EXPECT_EQ(detail::bin_of(-1.0 + 2.0 / 11.0, -1.0, 1.0), 1u);
  EXPECT_EQ(detail::bin_of(0.0, -1.0, 1.0), 5u);
}

TEST(Fpfh, SubHistogramsSumToHundred) {
  std::mt19937_64 rng(8);
  const PointCloud c = estimate_normals(sphere_cloud(rng, 600), 0.3);
  for (const auto& h : compute_fpfh(c, 0.4)) {
    if (detail::all_zero(h)) continue;
    for (int s = 0; s < 3; ++s) {
      double sum = 0.0;
      for (std::size_t b = 0; b < kFpfhBins; ++b) sum += h[s * kFpfhBins + b];
      EXPECT_NEAR(sum, 100.0, 1e-9);
    }
  }
}

TEST(Fpfh, InvalidNormalYieldsZeroDescriptor) {
  PointCloud c;
  c.points = {Point3(0, 0, 0), Point3(1, 0, 0), Point3(0, 1, 0)};
  c.normals = {Point3(0, 0, 1), Point3(0, 0, 1), Point3::Zero()};
  const auto d = compute_fpfh(c, 2.0);
  EXPECT_TRUE(detail::all_zero(d[2]));
  EXPECT_FALSE(detail::all_zero(d[0]));
  PointCloud no_normals;
  no_normals.points = c.points;
  EXPECT_THROW(compute_fpfh(no_normals, 1.0), Error);
}

TEST(Fpfh, InvariantUnderRigidMotion) {
  std::mt19937_64 rng(9);
  const PointCloud base = voxel_downsample(make_standin_cloud(3000, 5), 0.03);
  const auto ref = compute_fpfh(estimate_normals(base, 0.06), 0.15);
  for (int trial = 0; trial < 5; ++trial) {
    const PointCloud moved = apply(testing::random_motion(rng), base);
    const auto got = compute_fpfh(estimate_normals(moved, 0.06), 0.15);
    double worst = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      for (std::size_t b = 0; b < kFpfhSize; ++b) worst = std::max(worst, std::abs(ref[i][b] - got[i][b]));
    }
    EXPECT_LT(worst, 1e-6);
  }
}

using Desc1 = std::array<double, 1>;

TEST(MutualMatch, OneDimensionalToyKeepsOnlyReciprocalPair) {
  // {0, 10} against {1, 2}, shifted by 5 so no descriptor is all-zero.
  const std::vector<Desc1> p{{5.0}, {15.0}};
  const std::vector<Desc1> q{{6.0}, {7.0}};
  const CorrespondenceSet m = mutual_match(p, q);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.source_indices[0], 0u);
  EXPECT_EQ(m.target_indices[0], 0u);
}

TEST(MutualMatch, SkipsAllZeroDescriptors) {
  const std::vector<Desc1> p{{0.0}, {3.0}};
  const std::vector<Desc1> q{{0.0}, {3.0}};
  const CorrespondenceSet m = mutual_match(p, q);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.source_indices[0], 1u);
  EXPECT_EQ(m.target_indices[0], 1u);
}

TEST(MutualMatch, TiesResolveToLowerIndex) {
  const std::vector<Desc1> p{{3.0}};
  const std::vector<Desc1> q{{4.0}, {2.0}, {4.0}};
  const CorrespondenceSet m = mutual_match(p, q);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.target_indices[0], 0u);
}

TEST(MutualMatch, AgreesWithBruteForceOracle) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> level(0, 3);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::array<double, 4>> p(40), q(35);
    for (auto& d : p) for (auto& x : d) x = level(rng);
    for (auto& d : q) for (auto& x : d) x = level(rng);
    CorrespondenceSet want;
    auto dist = [](const auto& a, const auto& b) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
      return s;
    };
    auto zero = [](const auto& a) { return std::all_of(a.begin(), a.end(), [](double x) { return x == 0.0; }); };
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (zero(p[i])) continue;
      std::size_t bj = q.size();
      for (std::size_t j = 0; j < q.size(); ++j) {
        if (!zero(q[j]) && (bj == q.size() || dist(p[i], q[j]) < dist(p[i], q[bj]))) bj = j;
      }
      if (bj == q.size()) continue;
      std::size_t bi = p.size();
      for (std::size_t k = 0; k < p.size(); ++k) {
        if (!zero(p[k]) && (bi == p.size() || dist(p[k], q[bj]) < dist(p[bi], q[bj]))) bi = k;
      }
      if (bi == i) want.push_back(i, bj);
    }
    EXPECT_EQ(mutual_match(p, q), want);
  }
}

}  // namespace
}  // namespace sandro
