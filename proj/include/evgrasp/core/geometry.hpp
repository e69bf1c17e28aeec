#pragma once

#include "evgrasp/core/types.hpp"

#include <optional>

namespace evg {

/// Continuous pixel location plus camera-frame depth.
struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;  // meters, camera z
};

/// Perspective projection of a world point through a camera at `pose`
/// (camera body-to-world). Returns nullopt when the point is not in front
/// of the camera.
inline std::optional<PixelPoint> project_point(const Eigen::Vector3d& p_world,
                                               const CameraModel& cam,
                                               const Pose& pose) {
  const Eigen::Vector3d p_cam = pose.R.transpose() * (p_world - pose.t);
  if (p_cam.z() <= 0.0) return std::nullopt;
  const Eigen::Vector3d h = cam.K * p_cam;
  return PixelPoint{h.x() / h.z(), h.y() / h.z(), p_cam.z()};
}

/// Inverse of project_point: pixel (u, v) at camera depth z back to world
/// coordinates.
inline Eigen::Vector3d unproject_pixel(double u, double v, double depth,
                                       const CameraModel& cam,
                                       const Pose& pose) {
  const Eigen::Vector3d ray = cam.K.inverse() * Eigen::Vector3d(u, v, 1.0);
  const Eigen::Vector3d p_cam = depth * ray / ray.z();
  return pose.R * p_cam + pose.t;
}

}  // namespace evg
