#pragma once

#include "evgrasp/pointcloud/cloud.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <queue>

namespace evg {

/// Minimal static 3D k-d tree over a point cloud (median split, implicit
/// balanced layout). Supports radius queries and k-th neighbor distances.
class KdTree3 {
 public:
  explicit KdTree3(const PointCloud& pts) : pts_(pts), idx_(pts.size()) {
    std::iota(idx_.begin(), idx_.end(), std::size_t{0});
    if (!pts_.empty()) build(0, pts_.size(), 0);
  }

  /// Indices of points with |p - q| <= radius, ascending.
  void radius_search(const Eigen::Vector3d& q, double radius,
                     std::vector<std::size_t>& out) const {
    out.clear();
    if (!pts_.empty()) radius_rec(0, pts_.size(), 0, q, radius * radius, out);
    std::sort(out.begin(), out.end());
  }

  /// Distance from q to its k-th nearest point (1-based), optionally
  /// excluding one index (a query point querying its own cloud). Returns
  /// infinity when fewer than k candidates exist.
  [[nodiscard]] double kth_distance(const Eigen::Vector3d& q, int k,
                                    std::optional<std::size_t> exclude = {}) const {
    std::priority_queue<double> heap;  // max-heap of best k squared distances
    knn_rec(0, pts_.size(), 0, q, k, exclude, heap);
    if (static_cast<int>(heap.size()) < k)
      return std::numeric_limits<double>::infinity();
    return std::sqrt(heap.top());
  }

 private:
  void build(std::size_t lo, std::size_t hi, int depth) {
    if (hi - lo <= 1) return;
    const int axis = depth % 3;
    const std::size_t mid = (lo + hi) / 2;
    std::nth_element(idx_.begin() + lo, idx_.begin() + mid, idx_.begin() + hi,
                     [&](std::size_t a, std::size_t b) {
                       return pts_[a][axis] < pts_[b][axis];
                     });
    build(lo, mid, depth + 1);
    build(mid + 1, hi, depth + 1);
  }

  void radius_rec(std::size_t lo, std::size_t hi, int depth,
                  const Eigen::Vector3d& q, double r_sq,
                  std::vector<std::size_t>& out) const {
    if (lo >= hi) return;
    const int axis = depth % 3;
    const std::size_t mid = (lo + hi) / 2;
    const Eigen::Vector3d& p = pts_[idx_[mid]];
    if ((p - q).squaredNorm() <= r_sq) out.push_back(idx_[mid]);
    const double d = q[axis] - p[axis];
    if (d <= 0.0 || d * d <= r_sq) radius_rec(lo, mid, depth + 1, q, r_sq, out);
    if (d >= 0.0 || d * d <= r_sq) radius_rec(mid + 1, hi, depth + 1, q, r_sq, out);
  }

  void knn_rec(std::size_t lo, std::size_t hi, int depth, const Eigen::Vector3d& q,
               int k, std::optional<std::size_t> exclude,
               std::priority_queue<double>& heap) const {
    if (lo >= hi) return;
    const int axis = depth % 3;
    const std::size_t mid = (lo + hi) / 2;
    if (!(exclude && *exclude == idx_[mid])) {
      const double d_sq = (pts_[idx_[mid]] - q).squaredNorm();
      if (static_cast<int>(heap.size()) < k)
        heap.push(d_sq);
      else if (d_sq < heap.top()) {
        heap.pop();
        heap.push(d_sq);
      }
    }
    const double d = q[axis] - pts_[idx_[mid]][axis];
    const auto near_first = [&](std::size_t a0, std::size_t a1, std::size_t b0,
                                std::size_t b1) {
      knn_rec(a0, a1, depth + 1, q, k, exclude, heap);
      if (static_cast<int>(heap.size()) < k || d * d <= heap.top())
        knn_rec(b0, b1, depth + 1, q, k, exclude, heap);
    };
    if (d <= 0.0)
      near_first(lo, mid, mid + 1, hi);
    else
      near_first(mid + 1, hi, lo, mid);
  }

  const PointCloud& pts_;
  std::vector<std::size_t> idx_;
};

}  // namespace evg
