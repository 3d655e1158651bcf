#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "sandro/error.hpp"

namespace sandro {

using Point3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;
using Matrix4 = Eigen::Matrix4d;

/// Ordered 3D points with optional per-point normals.
///
/// When `normals` is non-empty it has the same length as `points`. A valid
/// normal has unit norm; an exact zero vector marks a point whose normal could
/// not be estimated.
struct PointCloud {
  std::vector<Point3> points;
  std::vector<Point3> normals;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  bool has_normals() const noexcept { return !normals.empty(); }

  bool normal_valid(std::size_t i) const {
    return has_normals() && normals[i].squaredNorm() > 0.0;
  }

  /// Throws Error(kValidation) if any invariant is broken.
  void validate() const {
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!points[i].allFinite()) {
        throw Error(ErrorCategory::kValidation,
                    "point " + std::to_string(i) + " has a non-finite coordinate");
      }
    }
    if (!has_normals()) return;
    if (normals.size() != points.size()) {
      throw Error(ErrorCategory::kValidation, "normal count " + std::to_string(normals.size()) +
                                                  " does not match point count " +
                                                  std::to_string(points.size()));
    }
    for (std::size_t i = 0; i < normals.size(); ++i) {
      const double n2 = normals[i].squaredNorm();
      if (!normals[i].allFinite() || (n2 != 0.0 && std::abs(std::sqrt(n2) - 1.0) > 1e-6)) {
        throw Error(ErrorCategory::kValidation,
                    "normal " + std::to_string(i) + " is neither unit length nor the invalid marker");
      }
    }
  }

  Point3 centroid() const {
    Point3 c = Point3::Zero();
    for (const auto& p : points) c += p;
    return points.empty() ? c : Point3(c / static_cast<double>(points.size()));
  }
};

/// A proper rigid motion x -> R x + t. Construction checks that R is a
/// rotation (orthogonal, det +1) to within `tolerance`.
class RigidTransform {
 public:
  static constexpr double kTolerance = 1e-9;

  RigidTransform() : rotation_(Matrix3::Identity()), translation_(Point3::Zero()) {}

  RigidTransform(const Matrix3& rotation, const Point3& translation, double tolerance = kTolerance)
      : rotation_(rotation), translation_(translation) {
    check(tolerance);
  }

  static RigidTransform identity() { return {}; }

  static RigidTransform from_translation(const Point3& t) { return {Matrix3::Identity(), t}; }

  static RigidTransform from_rotation(const Matrix3& r) { return {r, Point3::Zero()}; }

  /// Builds from a 4x4 homogeneous matrix. Rotation blocks within `tolerance`
  /// of SO(3) are accepted and then projected onto the nearest rotation so the
  /// stored value meets the tight invariant.
  static RigidTransform from_matrix(const Matrix4& m, double tolerance = 1e-6) {
    if (!m.allFinite()) {
      throw Error(ErrorCategory::kValidation, "transform contains non-finite entries");
    }
    const Eigen::RowVector4d last = m.row(3);
    if ((last - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > tolerance) {
      throw Error(ErrorCategory::kValidation, "last row of homogeneous transform is not [0 0 0 1]");
    }
    const Matrix3 r = m.topLeftCorner<3, 3>();
    RigidTransform loose;
    loose.rotation_ = r;
    loose.translation_ = m.topRightCorner<3, 1>();
    loose.check(tolerance);
    return {nearest_rotation(r), loose.translation_};
  }

  /// Orthogonal projection onto SO(3).
  static Matrix3 nearest_rotation(const Matrix3& m) {
    Eigen::JacobiSVD<Matrix3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Matrix3 d = Matrix3::Identity();
    d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
    return svd.matrixU() * d * svd.matrixV().transpose();
  }

  const Matrix3& rotation() const noexcept { return rotation_; }
  const Point3& translation() const noexcept { return translation_; }

  Matrix4 matrix() const {
    Matrix4 m = Matrix4::Identity();
    m.topLeftCorner<3, 3>() = rotation_;
    m.topRightCorner<3, 1>() = translation_;
    return m;
  }

  Point3 operator*(const Point3& x) const { return rotation_ * x + translation_; }

 private:
  void check(double tolerance) const {
    if (!rotation_.allFinite() || !translation_.allFinite()) {
      throw Error(ErrorCategory::kValidation, "transform contains non-finite entries");
    }
    const double orth = (rotation_.transpose() * rotation_ - Matrix3::Identity()).cwiseAbs().maxCoeff();
    if (orth > tolerance) {
      throw Error(ErrorCategory::kValidation,
                  "rotation is not orthogonal (max |R^T R - I| = " + std::to_string(orth) + ")");
    }
    const double det = rotation_.determinant();
    if (std::abs(det - 1.0) > tolerance) {
      throw Error(ErrorCategory::kValidation,
                  "rotation determinant is " + std::to_string(det) + ", expected +1");
    }
  }

  Matrix3 rotation_;
  Point3 translation_;
};

/// Applies `t` to every point; normals are rotated only.
inline PointCloud apply(const RigidTransform& t, const PointCloud& c) {
  PointCloud out;
  out.points.reserve(c.points.size());
  for (const auto& p : c.points) out.points.push_back(t * p);
  out.normals.reserve(c.normals.size());
  for (const auto& n : c.normals) out.normals.push_back(t.rotation() * n);
  return out;
}

/// compose(a, b) * x == a * (b * x).
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation()};
}

inline RigidTransform inverse(const RigidTransform& t) {
  const Matrix3 rt = t.rotation().transpose();
  return {rt, -(rt * t.translation())};
}

/// Replaces the points of each occupied voxel by their centroid. Voxel index is
/// floor(coordinate / voxel_size) per axis, so a point on a boundary falls in
/// the higher voxel. Output is ordered by ascending (ix, iy, iz). Normals, if
/// present, are averaged and renormalized; a cancelling average yields the
/// invalid marker.
inline PointCloud voxel_downsample(const PointCloud& c, double voxel_size) {
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
    throw Error(ErrorCategory::kConfig, "voxel size must be positive and finite");
  }
  using Key = std::array<std::int64_t, 3>;
  struct Entry {
    Key key;
    std::size_t index;
  };
  std::vector<Entry> entries;
  entries.reserve(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Point3& p = c.points[i];
    entries.push_back({Key{static_cast<std::int64_t>(std::floor(p.x() / voxel_size)),
                           static_cast<std::int64_t>(std::floor(p.y() / voxel_size)),
                           static_cast<std::int64_t>(std::floor(p.z() / voxel_size))},
                       i});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.key != b.key ? a.key < b.key : a.index < b.index;
  });

  PointCloud out;
  const bool normals = c.has_normals();
  for (std::size_t begin = 0; begin < entries.size();) {
    std::size_t end = begin;
    Point3 sum = Point3::Zero();
    Point3 nsum = Point3::Zero();
    while (end < entries.size() && entries[end].key == entries[begin].key) {
      sum += c.points[entries[end].index];
      if (normals) nsum += c.normals[entries[end].index];
      ++end;
    }
    out.points.push_back(sum / static_cast<double>(end - begin));
    if (normals) {
      const double n = nsum.norm();
      out.normals.push_back(n > 1e-12 ? Point3(nsum / n) : Point3::Zero());
    }
    begin = end;
  }
  return out;
}

}  // namespace sandro
