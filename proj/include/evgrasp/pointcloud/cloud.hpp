#pragma once

#include <Eigen/Core>

#include <vector>

namespace evg {

/// Plain 3D point set, meters, world frame unless stated otherwise.
using PointCloud = std::vector<Eigen::Vector3d>;

inline Eigen::Vector3d centroid(const PointCloud& cloud) {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& p : cloud) c += p;
  return cloud.empty() ? c : Eigen::Vector3d(c / static_cast<double>(cloud.size()));
}

}  // namespace evg
