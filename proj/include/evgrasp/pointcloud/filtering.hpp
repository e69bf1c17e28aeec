#pragma once

#include "evgrasp/pointcloud/kdtree.hpp"

namespace evg {

struct OutlierFilterResult {
  PointCloud cloud;
  bool undersized = false;  // fewer than k+1 points: input returned as-is
};

/// Keeps a point iff its k-th nearest neighbor (self excluded) lies within
/// max_dist. Clouds too small to have k neighbors are passed through,
/// flagged.
inline OutlierFilterResult remove_outliers(const PointCloud& cloud, int k,
                                           double max_dist) {
  if (k < 1) throw std::invalid_argument("remove_outliers: k must be >= 1");
  if (max_dist <= 0.0)
    throw std::invalid_argument("remove_outliers: max_dist must be > 0");
  if (cloud.size() < static_cast<std::size_t>(k) + 1)
    return OutlierFilterResult{cloud, true};

  const KdTree3 tree(cloud);
  OutlierFilterResult out;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (tree.kth_distance(cloud[i], k, i) <= max_dist)
      out.cloud.push_back(cloud[i]);
  return out;
}

/// Connected components of the within-`radius` adjacency graph, dropping
/// components smaller than min_points. Clusters come back sorted by
/// descending size, centroid lexicographic order on ties.
inline std::vector<PointCloud> euclidean_cluster(const PointCloud& cloud,
                                                 double radius,
                                                 std::size_t min_points = 1) {
  if (radius <= 0.0)
    throw std::invalid_argument("euclidean_cluster: radius must be > 0");

  const KdTree3 tree(cloud);
  std::vector<bool> visited(cloud.size(), false);
  std::vector<PointCloud> clusters;
  std::vector<std::size_t> stack, nbrs;

  for (std::size_t s = 0; s < cloud.size(); ++s) {
    if (visited[s]) continue;
    PointCloud comp;
    stack.assign(1, s);
    visited[s] = true;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      comp.push_back(cloud[i]);
      tree.radius_search(cloud[i], radius, nbrs);
      for (std::size_t j : nbrs)
        if (!visited[j]) {
          visited[j] = true;
          stack.push_back(j);
        }
    }
    if (comp.size() >= min_points) clusters.push_back(std::move(comp));
  }

  std::sort(clusters.begin(), clusters.end(),
            [](const PointCloud& a, const PointCloud& b) {
              if (a.size() != b.size()) return a.size() > b.size();
              const Eigen::Vector3d ca = centroid(a), cb = centroid(b);
              return std::lexicographical_compare(ca.data(), ca.data() + 3,
                                                  cb.data(), cb.data() + 3);
            });
  return clusters;
}

}  // namespace evg
