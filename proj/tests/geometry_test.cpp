#include <map>
#include <random>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace sandro {
namespace {

using testing::random_cloud;
using testing::random_motion;

TEST(RigidTransform, IdentityLeavesPointsUnchanged) {
  const Point3 x(0.3, -1.2, 4.0);
  EXPECT_EQ(RigidTransform::identity() * x, x);
}

TEST(RigidTransform, ComposeInverseAndApplyAgreeOnRandomMotions) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const RigidTransform a = random_motion(rng);
    const RigidTransform b = random_motion(rng);
    const PointCloud c = random_cloud(rng, 20);

    const RigidTransform ab = compose(a, b);
    const RigidTransform round = compose(a, inverse(a));
    EXPECT_LT((round.rotation() - Matrix3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(round.translation().cwiseAbs().maxCoeff(), 1e-12);

    const PointCloud once = apply(ab, c);
    const PointCloud twice = apply(a, apply(b, c));
    for (std::size_t i = 0; i < c.size(); ++i) {
      EXPECT_LT((once.points[i] - twice.points[i]).norm(), 1e-12);
      EXPECT_LT((apply(inverse(ab), once).points[i] - c.points[i]).norm(), 1e-12);
    }
  }
}

TEST(RigidTransform, ApplyRotatesNormalsWithoutTranslating) {
  PointCloud c;
  c.points = {Point3(1, 0, 0)};
  c.normals = {Point3(0, 0, 1)};
  const Matrix3 r = Eigen::AngleAxisd(std::numbers::pi / 2, Point3::UnitX()).toRotationMatrix();
  const PointCloud out = apply(RigidTransform(r, Point3(5, 5, 5)), c);
  EXPECT_LT((out.normals[0] - Point3(0, -1, 0)).norm(), 1e-15);
  EXPECT_LT((out.points[0] - Point3(6, 5, 5)).norm(), 1e-15);
}

TEST(RigidTransform, RejectsNonRotations) {
  Matrix3 scaled = Matrix3::Identity() * 1.01;
  EXPECT_THROW(RigidTransform(scaled, Point3::Zero()), Error);
  Matrix3 reflection = Matrix3::Identity();
  reflection(2, 2) = -1.0;
  try {
    RigidTransform bad(reflection, Point3::Zero());
    FAIL() << "reflection accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kValidation);
  }
}

TEST(RigidTransform, FromMatrixProjectsSmallDriftOntoSO3) {
  std::mt19937_64 rng(3);
  const RigidTransform t = random_motion(rng);
  Matrix4 m = t.matrix();
  m(0, 1) += 5e-7;
  const RigidTransform loaded = RigidTransform::from_matrix(m);
  EXPECT_LT((loaded.rotation().transpose() * loaded.rotation() - Matrix3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  m(0, 1) += 1e-4;
  EXPECT_THROW(RigidTransform::from_matrix(m), Error);
  Matrix4 bad_row = t.matrix();
  bad_row(3, 0) = 0.5;
  EXPECT_THROW(RigidTransform::from_matrix(bad_row), Error);
}

TEST(VoxelDownsample, MatchesBruteForceBucketing) {
  std::mt19937_64 rng(5);
  for (double voxel : {0.05, 0.2, 0.7}) {
    const PointCloud c = random_cloud(rng, 2000);
    std::map<std::array<long, 3>, std::pair<Point3, int>> buckets;
    for (const auto& p : c.points) {
      const std::array<long, 3> k{static_cast<long>(std::floor(p.x() / voxel)),
                                  static_cast<long>(std::floor(p.y() / voxel)),
                                  static_cast<long>(std::floor(p.z() / voxel))};
      auto& [sum, count] = buckets[k];
      if (count == 0) sum.setZero();
      sum += p;
      ++count;
    }
    const PointCloud out = voxel_downsample(c, voxel);
    ASSERT_EQ(out.size(), buckets.size());
    std::size_t i = 0;
    for (const auto& [key, acc] : buckets) {
      EXPECT_LT((out.points[i] - acc.first / acc.second).norm(), 1e-12);
      ++i;
    }
  }
}

TEST(VoxelDownsample, BoundaryPointGoesToUpperVoxel) {
  PointCloud c;
  c.points = {Point3(0.0, 0.0, 0.0), Point3(1.0, 0.0, 0.0), Point3(0.999, 0.0, 0.0)};
  const PointCloud out = voxel_downsample(c, 1.0);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_DOUBLE_EQ(out.points[0].x(), 0.4995);
  EXPECT_DOUBLE_EQ(out.points[1].x(), 1.0);
}

TEST(VoxelDownsample, AveragesNormalsAndMarksCancellation) {
  PointCloud c;
  c.points = {Point3(0.1, 0.1, 0.1), Point3(0.2, 0.2, 0.2), Point3(5.1, 0.1, 0.1), Point3(5.2, 0.1, 0.1)};
  c.normals = {Point3(0, 0, 1), Point3(0, 1, 0), Point3(1, 0, 0), Point3(-1, 0, 0)};
  const PointCloud out = voxel_downsample(c, 1.0);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_NEAR(out.normals[0].norm(), 1.0, 1e-15);
  EXPECT_NEAR(out.normals[0].y(), std::sqrt(0.5), 1e-15);
  EXPECT_FALSE(out.normal_valid(1));
}

TEST(VoxelDownsample, RejectsNonPositiveVoxel) {
  PointCloud c;
  c.points = {Point3::Zero()};
  EXPECT_THROW(voxel_downsample(c, 0.0), Error);
  EXPECT_THROW(voxel_downsample(c, -1.0), Error);
  EXPECT_EQ(voxel_downsample(PointCloud{}, 0.1).size(), 0u);
}

TEST(PointCloud, ValidateFlagsBadNormalsAndCoordinates) {
  PointCloud c;
  c.points = {Point3(0, 0, 0), Point3(1, 0, 0)};
  c.normals = {Point3(0, 0, 1), Point3::Zero()};
  EXPECT_NO_THROW(c.validate());
  c.normals[1] = Point3(0, 0, 2);
  EXPECT_THROW(c.validate(), Error);
  c.normals.pop_back();
  EXPECT_THROW(c.validate(), Error);
  c.normals.clear();
  c.points[0].x() = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(c.validate(), Error);
}

}  // namespace
}  // namespace sandro
