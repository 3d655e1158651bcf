#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sandro/error.hpp"
#include "sandro/geometry.hpp"

namespace sandro {

struct Neighbor {
  std::size_t index;
  double sq_distance;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.sq_distance != b.sq_distance ? a.sq_distance < b.sq_distance : a.index < b.index;
  }
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Static 3D kd-tree. Results are exact and ordered by (distance, index), so
/// they match an exhaustive scan element for element. Queries are const and
/// may run concurrently once built.
class KdTree {
 public:
  explicit KdTree(std::span<const Point3> points, std::size_t leaf_size = 12)
      : points_(points.begin(), points.end()), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
    order_.resize(points_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (!points_.empty()) build(0, order_.size());
  }

  std::size_t size() const noexcept { return points_.size(); }

  /// The min(k, size) nearest points, ascending.
  std::vector<Neighbor> knn(const Point3& query, std::size_t k) const {
    require_nonempty();
    if (k == 0) throw Error(ErrorCategory::kConfig, "k-NN query needs k >= 1");
    std::vector<Neighbor> best;
    best.reserve(std::min(k, points_.size()) + 1);
    knn_recurse(0, query, std::min(k, points_.size()), best);
    return best;
  }

  /// All points with squared distance <= radius^2, ascending.
  std::vector<Neighbor> radius(const Point3& query, double radius) const {
    require_nonempty();
    if (!(radius > 0.0)) throw Error(ErrorCategory::kConfig, "radius query needs radius > 0");
    std::vector<Neighbor> out;
    radius_recurse(0, query, radius * radius, out);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct Node {
    std::size_t begin, end;  // range in order_
    std::int32_t left = -1, right = -1;
    int axis = 0;
    double split = 0.0;
    bool leaf() const { return left < 0; }
  };

  void require_nonempty() const {
    if (points_.empty()) throw Error(ErrorCategory::kValidation, "no index: nearest-neighbor search over an empty cloud");
  }

  std::int32_t build(std::size_t begin, std::size_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({begin, end});
    if (end - begin <= leaf_size_) return id;

    Point3 lo = points_[order_[begin]], hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] == lo[axis]) return id;  // all coincident

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
    const double split = points_[order_[mid]][axis];
    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    Node& n = nodes_[static_cast<std::size_t>(id)];
    n.left = left;
    n.right = right;
    n.axis = axis;
    n.split = split;
    return id;
  }

  // Left subtree holds coordinates <= split, right holds >= split.
  void knn_recurse(std::int32_t id, const Point3& q, std::size_t k, std::vector<Neighbor>& best) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.leaf()) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const std::size_t idx = order_[i];
        const Neighbor cand{idx, (points_[idx] - q).squaredNorm()};
        if (best.size() == k && !(cand < best.back())) continue;
        best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
        if (best.size() > k) best.pop_back();
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const std::int32_t near = diff <= 0 ? n.left : n.right;
    const std::int32_t far = diff <= 0 ? n.right : n.left;
    knn_recurse(near, q, k, best);
    if (best.size() < k || diff * diff <= best.back().sq_distance) knn_recurse(far, q, k, best);
  }

  void radius_recurse(std::int32_t id, const Point3& q, double r2, std::vector<Neighbor>& out) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.leaf()) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const std::size_t idx = order_[i];
        const double d2 = (points_[idx] - q).squaredNorm();
        if (d2 <= r2) out.push_back({idx, d2});
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    if (diff <= 0 || diff * diff <= r2) radius_recurse(n.left, q, r2, out);
    if (diff >= 0 || diff * diff <= r2) radius_recurse(n.right, q, r2, out);
  }

  std::vector<Point3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_;
};

}  // namespace sandro
