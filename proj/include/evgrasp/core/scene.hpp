#pragma once

#include "evgrasp/core/types.hpp"

#include <array>
#include <stdexcept>
#include <vector>

namespace evg {

/// Axis-dimensioned convex box resting in the world, rotated about z by
/// `yaw_deg`. Surface brightness is a single log-intensity value; the
/// renderer applies flat per-face shading on top of it.
struct SceneObject {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();  // meters
  Eigen::Vector3d dims = Eigen::Vector3d::Ones();    // edge lengths, meters
  double yaw_deg = 0.0;
  double log_intensity = 1.0;

  [[nodiscard]] Pose pose() const { return Pose::planar(center, yaw_deg); }

  /// The 8 corners in world coordinates. Order: z-low quad then z-high
  /// quad, each counter-clockwise from (-x, -y).
  [[nodiscard]] std::array<Eigen::Vector3d, 8> corners() const {
    std::array<Eigen::Vector3d, 8> out;
    const Pose p = pose();
    int i = 0;
    for (int sz : {-1, 1})
      for (auto [sx, sy] : {std::pair{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}) {
        Eigen::Vector3d local(0.5 * sx * dims.x(), 0.5 * sy * dims.y(),
                              0.5 * sz * dims.z());
        out[i++] = p.apply(local);
      }
    return out;
  }

  void validate() const {
    if (dims.minCoeff() <= 0.0)
      throw std::invalid_argument("SceneObject: dimensions must be positive");
  }
};

/// Static desk-scale scene: boxes over a uniform background.
struct Scene {
  std::vector<SceneObject> objects;
  double background_log_intensity = 0.2;

  void validate() const {
    for (const auto& o : objects) o.validate();
  }
};

}  // namespace evg
