#pragma once

#include "evgrasp/core/geometry.hpp"
#include "evgrasp/core/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace evg {

/// Per-pixel rendering of a scene from one camera pose: log intensity,
/// camera-frame depth (infinity on background) and the id of the visible
/// object (-1 for background).
struct RenderedView {
  int width = 0;
  int height = 0;
  std::vector<double> log_intensity;
  std::vector<double> depth;
  std::vector<int32_t> object_id;

  [[nodiscard]] std::size_t idx(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
};

struct RenderOptions {
  // Flat Lambertian shading per face so that interior edges between faces
  // of one object produce brightness steps.
  Eigen::Vector3d light_dir = Eigen::Vector3d(0.35, 0.2, 1.0).normalized();
  double shade_gain = 0.25;
};

namespace detail {

// Face of a box as indices into SceneObject::corners(); outward order.
inline constexpr std::array<std::array<int, 4>, 6> kBoxFaces = {{
    {0, 3, 2, 1},  // bottom (z-)
    {4, 5, 6, 7},  // top (z+)
    {0, 1, 5, 4},  // y-
    {2, 3, 7, 6},  // y+
    {1, 2, 6, 5},  // x+
    {3, 0, 4, 7},  // x-
}};

inline bool point_in_convex_quad(const std::array<Eigen::Vector2d, 4>& q,
                                 double px, double py) {
  double ref = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector2d& a = q[i];
    const Eigen::Vector2d& b = q[(i + 1) % 4];
    double cross = (b.x() - a.x()) * (py - a.y()) - (b.y() - a.y()) * (px - a.x());
    if (std::abs(cross) < 1e-12) continue;  // on an edge: accept
    if (ref == 0.0)
      ref = cross;
    else if (cross * ref < 0.0)
      return false;
  }
  return true;
}

}  // namespace detail

/// Z-buffer rasterization of every box face. Pixels are sampled at integer
/// coordinates. Faces with any corner behind the camera are skipped; at
/// desk scale with an overhead camera this never clips visible geometry.
inline RenderedView render_view(const Scene& scene, const CameraModel& cam,
                                const Pose& cam_pose,
                                const RenderOptions& opt = {}) {
  RenderedView view;
  view.width = cam.width;
  view.height = cam.height;
  const std::size_t n = static_cast<std::size_t>(cam.width) * cam.height;
  view.log_intensity.assign(n, scene.background_log_intensity);
  view.depth.assign(n, std::numeric_limits<double>::infinity());
  view.object_id.assign(n, -1);

  const Eigen::Matrix3d R_wc = cam_pose.R.transpose();  // world -> camera
  const Eigen::Matrix3d K_inv = cam.K.inverse();

  for (std::size_t oid = 0; oid < scene.objects.size(); ++oid) {
    const SceneObject& obj = scene.objects[oid];
    const auto corners = obj.corners();
    std::array<Eigen::Vector3d, 8> cam_corners;
    for (int i = 0; i < 8; ++i)
      cam_corners[i] = R_wc * (corners[i] - cam_pose.t);

    for (const auto& face : detail::kBoxFaces) {
      std::array<Eigen::Vector2d, 4> px;
      bool in_front = true;
      for (int i = 0; i < 4 && in_front; ++i) {
        const Eigen::Vector3d& c = cam_corners[face[i]];
        if (c.z() <= 1e-6) {
          in_front = false;
          break;
        }
        const Eigen::Vector3d h = cam.K * c;
        px[i] = Eigen::Vector2d(h.x() / h.z(), h.y() / h.z());
      }
      if (!in_front) continue;

      // Camera-frame face plane.
      const Eigen::Vector3d& p0 = cam_corners[face[0]];
      Eigen::Vector3d n_cam = (cam_corners[face[1]] - p0)
                                  .cross(cam_corners[face[2]] - p0);
      const double nn = n_cam.norm();
      if (nn < 1e-12) continue;
      n_cam /= nn;
      const double plane_d = n_cam.dot(p0);
      if (std::abs(plane_d) < 1e-12) continue;  // plane through the center

      // Backface cull: camera is at the origin of the camera frame.
      // Keep faces whose plane faces the camera (sign of d vs normal).

      double shade = 0.0;
      {
        Eigen::Vector3d n_world =
            (corners[face[1]] - corners[face[0]])
                .cross(corners[face[2]] - corners[face[0]])
                .normalized();
        // Outward orientation: points away from the box center.
        if (n_world.dot(corners[face[0]] - obj.center) < 0.0) n_world = -n_world;
        shade = opt.shade_gain * n_world.dot(opt.light_dir);
      }
      const double face_log = obj.log_intensity + shade;

      int x0 = cam.width, x1 = -1, y0 = cam.height, y1 = -1;
      for (const auto& p : px) {
        x0 = std::min(x0, static_cast<int>(std::floor(p.x())));
        x1 = std::max(x1, static_cast<int>(std::ceil(p.x())));
        y0 = std::min(y0, static_cast<int>(std::floor(p.y())));
        y1 = std::max(y1, static_cast<int>(std::ceil(p.y())));
      }
      x0 = std::max(x0, 0);
      y0 = std::max(y0, 0);
      x1 = std::min(x1, cam.width - 1);
      y1 = std::min(y1, cam.height - 1);

      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          if (!detail::point_in_convex_quad(px, x, y)) continue;
          const Eigen::Vector3d ray = K_inv * Eigen::Vector3d(x, y, 1.0);
          const double denom = n_cam.dot(ray);
          if (std::abs(denom) < 1e-12) continue;
          const double s = plane_d / denom;
          const double z = s * ray.z();
          if (z <= 0.0) continue;
          const std::size_t i = view.idx(x, y);
          if (z < view.depth[i]) {
            view.depth[i] = z;
            view.log_intensity[i] = face_log;
            view.object_id[i] = static_cast<int32_t>(oid);
          }
        }
      }
    }
  }
  return view;
}

}  // namespace evg
