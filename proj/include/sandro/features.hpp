#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sandro/error.hpp"
#include "sandro/geometry.hpp"
#include "sandro/kdtree.hpp"

namespace sandro {

inline constexpr std::size_t kFpfhBins = 11;
inline constexpr std::size_t kFpfhSize = 3 * kFpfhBins;

/// Three 11-bin sub-histograms laid out as [alpha | phi | theta]. Each
/// sub-histogram sums to 100 for a point with usable neighbors; otherwise the
/// whole descriptor is zero.
using FpfhDescriptor = std::array<double, kFpfhSize>;

/// Putative matches: source_indices[k] in the source cloud pairs with
/// target_indices[k] in the target cloud.
struct CorrespondenceSet {
  std::vector<std::size_t> source_indices;
  std::vector<std::size_t> target_indices;

  std::size_t size() const noexcept { return source_indices.size(); }
  bool empty() const noexcept { return source_indices.empty(); }

  void push_back(std::size_t source, std::size_t target) {
    source_indices.push_back(source);
    target_indices.push_back(target);
  }

  static CorrespondenceSet identity(std::size_t n) {
    CorrespondenceSet c;
    for (std::size_t i = 0; i < n; ++i) c.push_back(i, i);
    return c;
  }

  friend bool operator==(const CorrespondenceSet&, const CorrespondenceSet&) = default;
};

/// Unit normals from the smallest-eigenvalue eigenvector of the neighborhood
/// covariance (neighbors within `radius`, the point itself included). Normals
/// are flipped to point away from the cloud centroid. Points with fewer than
/// `min_neighbors` points in their neighborhood get the zero (invalid) normal.
inline PointCloud estimate_normals(const PointCloud& cloud, double radius, std::size_t min_neighbors = 3) {
  if (!(radius > 0.0)) throw Error(ErrorCategory::kConfig, "normal radius must be positive");
  PointCloud out;
  out.points = cloud.points;
  out.normals.assign(cloud.size(), Point3::Zero());
  if (cloud.empty()) return out;

  const KdTree tree(cloud.points);
  const Point3 centroid = cloud.centroid();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nbrs = tree.radius(cloud.points[i], radius);
    if (nbrs.size() < std::max<std::size_t>(min_neighbors, 1)) continue;

    Point3 mean = Point3::Zero();
    for (const auto& n : nbrs) mean += cloud.points[n.index];
    mean /= static_cast<double>(nbrs.size());
    Matrix3 cov = Matrix3::Zero();
    for (const auto& n : nbrs) {
      const Point3 d = cloud.points[n.index] - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Matrix3> eig(cov);
    Point3 normal = eig.eigenvectors().col(0).normalized();
    if (!normal.allFinite()) continue;

    const double facing = normal.dot(cloud.points[i] - centroid);
    if (facing < 0.0) {
      normal = -normal;
    } else if (facing == 0.0) {
      // Tangent to the centroid direction: fall back to a fixed sign convention.
      int axis = 0;
      normal.cwiseAbs().maxCoeff(&axis);
      if (normal[axis] < 0.0) normal = -normal;
    }
    out.normals[i] = normal;
  }
  return out;
}

namespace detail {

struct PairFeatures {
  double alpha;  // v . n_t, in [-1, 1]
  double phi;    // u . d / |d|, in [-1, 1]
  double theta;  // arctan(w . n_t / u . n_t), in [-pi/2, pi/2]
};

inline constexpr double kAnchorTieTolerance = 1e-12;

/// Darboux-frame angles for an oriented point pair. The frame is anchored at
/// whichever point's normal is closer to parallel with the connecting line.
/// Returns false when the frame is undefined (coincident points or a normal
/// parallel to the connecting line).
inline bool pair_features(const Point3& p1, const Point3& n1, const Point3& p2, const Point3& n2,
                          PairFeatures& f) {
  Point3 d = p2 - p1;
  const double dist = d.norm();
  if (dist == 0.0) return false;
  d /= dist;

  const double c1 = n1.dot(d);
  const double c2 = n2.dot(d);
  Point3 u = n1, nt = n2;
  double phi = c1;
  // Anchor on the normal closer to the connecting line. Near-ties keep p1 so
  // that identical normals give the same frame in every coordinate system.
  if (std::abs(c2) > std::abs(c1) + kAnchorTieTolerance) {
    u = n2;
    nt = n1;
    d = -d;
    phi = -c2;
  }
  Point3 v = d.cross(u);
  const double vn = v.norm();
  if (vn == 0.0) return false;
  v /= vn;
  const Point3 w = u.cross(v);

  f.alpha = v.dot(nt);
  f.phi = phi;
  const double num = w.dot(nt);
  const double den = u.dot(nt);
  if (den == 0.0) {
    f.theta = num < 0.0 ? -std::numbers::pi / 2 : std::numbers::pi / 2;
  } else {
    f.theta = std::atan(num / den);
  }
  return true;
}

/// Linear bin over [lo, hi]; boundaries go to the upper bin, hi to the last.
inline std::size_t bin_of(double x, double lo, double hi) {
  const double scaled = (x - lo) / (hi - lo) * static_cast<double>(kFpfhBins);
  if (!(scaled > 0.0)) return 0;
  const auto b = static_cast<std::size_t>(std::floor(scaled));
  return std::min(b, kFpfhBins - 1);
}

inline void normalize_subhistograms(FpfhDescriptor& h) {
  for (std::size_t s = 0; s < 3; ++s) {
    double sum = 0.0;
    for (std::size_t b = 0; b < kFpfhBins; ++b) sum += h[s * kFpfhBins + b];
    if (sum <= 0.0) continue;
    for (std::size_t b = 0; b < kFpfhBins; ++b) h[s * kFpfhBins + b] *= 100.0 / sum;
  }
}

inline bool all_zero(const FpfhDescriptor& h) {
  for (double x : h) {
    if (x != 0.0) return false;
  }
  return true;
}

}  // namespace detail

/// Fast Point Feature Histograms. Pass one accumulates each point's simplified
/// histogram (SPFH) over its radius neighbors; pass two adds the
/// inverse-distance-weighted mean of the neighbors' SPFHs. Points without a
/// valid normal, or without usable neighbors, get the zero descriptor.
inline std::vector<FpfhDescriptor> compute_fpfh(const PointCloud& cloud, double radius) {
  if (!(radius > 0.0)) throw Error(ErrorCategory::kConfig, "feature radius must be positive");
  if (!cloud.has_normals()) throw Error(ErrorCategory::kValidation, "FPFH requires normals");
  const std::size_t n = cloud.size();
  std::vector<FpfhDescriptor> spfh(n, FpfhDescriptor{});
  std::vector<FpfhDescriptor> fpfh(n, FpfhDescriptor{});
  if (n == 0) return fpfh;

  const KdTree tree(cloud.points);
  std::vector<std::vector<Neighbor>> neighborhoods(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!cloud.normal_valid(i)) continue;
    for (const auto& nb : tree.radius(cloud.points[i], radius)) {
      if (nb.index == i || nb.sq_distance == 0.0 || !cloud.normal_valid(nb.index)) continue;
      neighborhoods[i].push_back(nb);
    }
  }

  using std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    auto& h = spfh[i];
    for (const auto& nb : neighborhoods[i]) {
      detail::PairFeatures f{};
      if (!detail::pair_features(cloud.points[i], cloud.normals[i], cloud.points[nb.index],
                                 cloud.normals[nb.index], f)) {
        continue;
      }
      h[detail::bin_of(f.alpha, -1.0, 1.0)] += 1.0;
      h[kFpfhBins + detail::bin_of(f.phi, -1.0, 1.0)] += 1.0;
      h[2 * kFpfhBins + detail::bin_of(f.theta, -pi / 2, pi / 2)] += 1.0;
    }
    detail::normalize_subhistograms(h);
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto& nbrs = neighborhoods[i];
    auto& out = fpfh[i];
    out = spfh[i];
    if (!nbrs.empty()) {
      const double inv_k = 1.0 / static_cast<double>(nbrs.size());
      for (const auto& nb : nbrs) {
        const double weight = inv_k / std::sqrt(nb.sq_distance);
        const auto& other = spfh[nb.index];
        for (std::size_t b = 0; b < kFpfhSize; ++b) out[b] += weight * other[b];
      }
    }
    detail::normalize_subhistograms(out);
  }
  return fpfh;
}

/// Reciprocal nearest neighbors in descriptor space (squared L2). All-zero
/// descriptors are ignored. Ties go to the lower index. Output is ordered by
/// source index.
template <std::size_t D>
CorrespondenceSet mutual_match(const std::vector<std::array<double, D>>& desc_p,
                               const std::vector<std::array<double, D>>& desc_q) {
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  auto usable = [](const std::array<double, D>& d) {
    for (double x : d) {
      if (x != 0.0) return true;
    }
    return false;
  };

  std::vector<std::size_t> p_ok, q_ok;
  for (std::size_t i = 0; i < desc_p.size(); ++i) {
    if (usable(desc_p[i])) p_ok.push_back(i);
  }
  for (std::size_t j = 0; j < desc_q.size(); ++j) {
    if (usable(desc_q[j])) q_ok.push_back(j);
  }

  std::vector<std::size_t> row_best(desc_p.size(), kNone), col_best(desc_q.size(), kNone);
  std::vector<double> row_d(desc_p.size(), kInf), col_d(desc_q.size(), kInf);
  for (std::size_t i : p_ok) {
    const auto& a = desc_p[i];
    for (std::size_t j : q_ok) {
      const auto& b = desc_q[j];
      double d = 0.0;
      for (std::size_t k = 0; k < D; ++k) {
        const double diff = a[k] - b[k];
        d += diff * diff;
      }
      if (d < row_d[i]) {
        row_d[i] = d;
        row_best[i] = j;
      }
      if (d < col_d[j]) {
        col_d[j] = d;
        col_best[j] = i;
      }
    }
  }

  CorrespondenceSet out;
  for (std::size_t i : p_ok) {
    const std::size_t j = row_best[i];
    if (j != kNone && col_best[j] == i) out.push_back(i, j);
  }
  return out;
}

}  // namespace sandro
