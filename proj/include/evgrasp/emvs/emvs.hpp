#pragma once

#include "evgrasp/core/geometry.hpp"
#include "evgrasp/pointcloud/cloud.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace evg::emvs {

/// Disparity space image: ray-vote counts over width x height x N_z voxels
/// anchored at the reference camera view. Plane depths are strictly
/// increasing.
struct DsiVolume {
  int width = 0;
  int height = 0;
  std::vector<double> depth_planes;   // meters
  std::vector<uint32_t> scores;       // width * height per plane
  Pose ref_pose;
  std::size_t skipped_events = 0;     // events outside the trajectory span

  [[nodiscard]] std::size_t idx(int x, int y, std::size_t plane) const {
    return (plane * height + y) * static_cast<std::size_t>(width) + x;
  }
  [[nodiscard]] uint32_t at(int x, int y, std::size_t plane) const {
    return scores[idx(x, y, plane)];
  }
  [[nodiscard]] uint64_t total_votes() const {
    uint64_t s = 0;
    for (uint32_t v : scores) s += v;
    return s;
  }
};

/// Semi-dense depth map: per-pixel best plane depth and its vote count;
/// pixels below the confidence threshold are empty (NaN, confidence 0).
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> depth;        // NaN when empty
  std::vector<uint32_t> confidence;

  [[nodiscard]] std::size_t idx(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
  [[nodiscard]] bool valid(int x, int y) const {
    return confidence[idx(x, y)] > 0;
  }
  [[nodiscard]] std::size_t valid_count() const {
    std::size_t n = 0;
    for (uint32_t c : confidence) n += c > 0 ? 1 : 0;
    return n;
  }
};

/// Plane-induced homography in normalized camera coordinates for the depth
/// plane Z_i of the reference view: H = R + (1/Z_i) t e3^T, where (R, t)
/// is the reference-to-target relative pose.
inline Eigen::Matrix3d homography_at_depth(const Eigen::Matrix3d& R,
                                           const Eigen::Vector3d& t, double z) {
  if (z <= 0.0) throw std::invalid_argument("homography_at_depth: depth must be > 0");
  Eigen::Matrix3d h = R;
  h.col(2) += t / z;
  return h;
}

/// Transfers a pixel between two depth planes of the reference view by the
/// plane-to-plane homology H_Zi * H_Z0^-1. Returns nullopt when the pixel
/// maps to the plane at infinity.
inline std::optional<Eigen::Vector2d> back_project(const Eigen::Vector2d& pixel,
                                                   const Eigen::Matrix3d& h_z0,
                                                   const Eigen::Matrix3d& h_zi) {
  const Eigen::Matrix3d m = h_zi * h_z0.inverse();
  const Eigen::Vector3d v = m * Eigen::Vector3d(pixel.x(), pixel.y(), 1.0);
  if (std::abs(v.z()) < 1e-12) return std::nullopt;
  return Eigen::Vector2d(v.x() / v.z(), v.y() / v.z());
}

/// Depth planes uniformly spaced in inverse depth over [z_min, z_max].
inline std::vector<double> inverse_depth_planes(double z_min, double z_max,
                                                std::size_t n_z) {
  if (n_z < 2) throw std::invalid_argument("depth planes: need at least 2");
  if (!(z_min > 0.0 && z_min < z_max))
    throw std::invalid_argument("depth planes: require 0 < z_min < z_max");
  std::vector<double> planes(n_z);
  const double w0 = 1.0 / z_min, w1 = 1.0 / z_max;
  for (std::size_t i = 0; i < n_z; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(n_z - 1);
    planes[i] = 1.0 / (w0 + (w1 - w0) * u);
  }
  planes.front() = z_min;
  planes.back() = z_max;
  return planes;
}

/// Builds the DSI of the trajectory's first pose by warping every event
/// through all depth planes and counting ray hits per voxel. Events whose
/// timestamps the trajectory does not cover are skipped and counted.
inline DsiVolume build_dsi(const EventStream& stream, const Trajectory& traj,
                           const CameraModel& cam, double z_min, double z_max,
                           std::size_t n_z) {
  cam.validate();
  DsiVolume dsi;
  dsi.width = cam.width;
  dsi.height = cam.height;
  dsi.depth_planes = inverse_depth_planes(z_min, z_max, n_z);
  dsi.scores.assign(static_cast<std::size_t>(cam.width) * cam.height * n_z, 0);
  dsi.ref_pose = traj.pose_at(traj.start_time());

  const Eigen::Matrix3d K = cam.K;
  const Eigen::Matrix3d K_inv = K.inverse();
  const Eigen::Matrix3d& R_r = dsi.ref_pose.R;
  const Eigen::Vector3d& t_r = dsi.ref_pose.t;

  std::size_t i = 0;
  std::vector<Eigen::Matrix3d> homology(n_z);  // plane Z_0 -> plane Z_i, pixels
  while (i < stream.events.size()) {
    // One group of events sharing a timestamp shares its pose and warps.
    const int64_t t = stream.events[i].t;
    std::size_t j = i;
    while (j < stream.events.size() && stream.events[j].t == t) ++j;

    if (!traj.covers(t)) {
      dsi.skipped_events += j - i;
      i = j;
      continue;
    }
    const Pose view = traj.pose_at(t);
    const Eigen::Matrix3d r_rel = view.R.transpose() * R_r;
    const Eigen::Vector3d t_rel = view.R.transpose() * (t_r - view.t);

    // Pixel homography event -> reference at each plane, then the homology
    // that carries the plane-Z_0 projection to plane Z_i.
    Eigen::Matrix3d a0;
    for (std::size_t p = 0; p < n_z; ++p) {
      const Eigen::Matrix3d g =
          K * homography_at_depth(r_rel, t_rel, dsi.depth_planes[p]) * K_inv;
      const Eigen::Matrix3d a = g.inverse();
      if (p == 0) a0 = a;
      homology[p] = a * a0.inverse();
    }

    for (; i < j; ++i) {
      const Event& e = stream.events[i];
      const Eigen::Vector3d lifted = a0 * Eigen::Vector3d(e.x, e.y, 1.0);
      if (std::abs(lifted.z()) < 1e-12) continue;
      const Eigen::Vector2d q0(lifted.x() / lifted.z(), lifted.y() / lifted.z());
      for (std::size_t p = 0; p < n_z; ++p) {
        const Eigen::Vector3d v = homology[p] * Eigen::Vector3d(q0.x(), q0.y(), 1.0);
        if (std::abs(v.z()) < 1e-12) continue;
        const auto x = static_cast<int>(std::llround(v.x() / v.z()));
        const auto y = static_cast<int>(std::llround(v.y() / v.z()));
        if (x < 0 || x >= cam.width || y < 0 || y >= cam.height) continue;
        ++dsi.scores[dsi.idx(x, y, p)];
      }
    }
  }
  return dsi;
}

/// Per-pixel argmax over depth planes, kept when the winning vote count
/// reaches `confidence_threshold` (>= 1). Ties resolve to the nearest
/// plane.
inline DepthMap extract_depth(const DsiVolume& dsi, uint32_t confidence_threshold) {
  if (confidence_threshold < 1)
    throw std::invalid_argument("extract_depth: threshold must be >= 1");
  DepthMap map;
  map.width = dsi.width;
  map.height = dsi.height;
  map.depth.assign(static_cast<std::size_t>(dsi.width) * dsi.height,
                   std::numeric_limits<double>::quiet_NaN());
  map.confidence.assign(map.depth.size(), 0);

  for (int y = 0; y < dsi.height; ++y)
    for (int x = 0; x < dsi.width; ++x) {
      uint32_t best = 0;
      std::size_t best_plane = 0;
      for (std::size_t p = 0; p < dsi.depth_planes.size(); ++p) {
        const uint32_t v = dsi.at(x, y, p);
        if (v > best) {
          best = v;
          best_plane = p;
        }
      }
      if (best >= confidence_threshold) {
        map.depth[map.idx(x, y)] = dsi.depth_planes[best_plane];
        map.confidence[map.idx(x, y)] = best;
      }
    }
  return map;
}

/// Inverse-projects every valid depth-map pixel into the world frame.
inline PointCloud to_point_cloud(const DepthMap& map, const CameraModel& cam,
                                 const Pose& ref_pose) {
  PointCloud cloud;
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x)
      if (map.valid(x, y))
        cloud.push_back(unproject_pixel(x, y, map.depth[map.idx(x, y)], cam, ref_pose));
  return cloud;
}

}  // namespace evg::emvs
