#pragma once

#include "evgrasp/pipeline/common.hpp"

#include <array>
#include <map>
#include "evgrasp/pointcloud/registration.hpp"

namespace evg::pipeline {

/// Model-based multi-object grasping: scan the scene once, reconstruct and
/// cluster the corner cloud, register the unit-cube model per cluster,
/// drive the gripper to the position-based target and grasp. Objects are
/// processed in descending cluster size; a stage failure aborts only the
/// current object.
inline PipelineResult run_model_based(const Scenario& sc,
                                      const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  const bool write = !out_dir.empty();
  if (write) fs::create_directories(out_dir);

  PipelineResult result;
  const ScanReconstruction scan = run_scan(sc, out_dir);

  const auto filtered =
      remove_outliers(scan.cloud, sc.cloud.outlier_k, sc.cloud.outlier_max_dist);
  auto clusters =
      euclidean_cluster(filtered.cloud, sc.cloud.cluster_radius,
                        static_cast<std::size_t>(sc.cloud.cluster_min_points));

  // Corner visibility varies per object, so the extraction floor is low and
  // each cluster is re-thresholded against its own confidence peak.
  std::map<std::array<double, 3>, uint32_t> conf;
  for (int y = 0; y < scan.depth_map.height; ++y)
    for (int x = 0; x < scan.depth_map.width; ++x)
      if (scan.depth_map.valid(x, y)) {
        const Eigen::Vector3d p = unproject_pixel(
            x, y, scan.depth_map.depth[scan.depth_map.idx(x, y)], sc.camera,
            scan.ref_pose);
        conf[{p.x(), p.y(), p.z()}] = scan.depth_map.confidence[scan.depth_map.idx(x, y)];
      }
  for (auto& cluster : clusters) {
    uint32_t peak = 0;
    for (const auto& p : cluster) {
      const auto it = conf.find({p.x(), p.y(), p.z()});
      if (it != conf.end()) peak = std::max(peak, it->second);
    }
    const double cut = sc.emvs.cluster_rel * peak;
    PointCloud kept;
    for (const auto& p : cluster) {
      const auto it = conf.find({p.x(), p.y(), p.z()});
      if (it != conf.end() && it->second >= cut) kept.push_back(p);
    }
    if (kept.size() >= 3) cluster = std::move(kept);
  }

  if (write) {
    for (std::size_t i = 0; i < clusters.size(); ++i)
      io::write_point_cloud(clusters[i],
                            out_dir / ("cluster_" + std::to_string(i) + ".csv"));
  }

  std::vector<bool> taken(sc.scene.objects.size(), false);
  std::mt19937_64 pick_rng(derive_seed(sc.seed, 10));

  for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
    io::MetricsRow row;
    row.scenario = sc.name;
    row.object_id = static_cast<int>(ci);
    try {
      const ObjectRegistration reg =
          register_model(clusters[ci], unit_cube_model(), sc.cloud.condense_radius);
      if (write)
        io::write_transform(reg.transform,
                            out_dir / ("transform_" + std::to_string(ci) + ".txt"));

      if (!sc.workspace.contains(reg.centroid))
        throw RegistrationError("object centroid outside the workspace");

      const auto [obj_idx, obj_dist] =
          nearest_object(sc.scene, reg.centroid.head<2>(), taken);
      if (obj_idx < 0 || obj_dist > 0.15)
        throw RegistrationError("registration matches no remaining object");
      const SceneObject& obj = sc.scene.objects[obj_idx];

      // Position-based servo goal; the kinematic plant takes pose goals
      // directly, so the gripper reaches it exactly.
      const Pose pre_grasp = servoing::pbvs_target(reg, sc.grasp.grasp_offset_m);
      const Pose grip_pose = Pose::planar(
          Eigen::Vector3d(pre_grasp.t.x(), pre_grasp.t.y(), reg.centroid.z()),
          reg.yaw_deg);

      // Aperture check across the registered short axis.
      const double close_dir = deg2rad(reg.yaw_deg + 90.0);
      const Eigen::Vector2d u(std::cos(close_dir), std::sin(close_dir));
      double lo = 1e9, hi = -1e9;
      for (const auto& p : reg.condensed) {
        const double s = u.dot(p.head<2>());
        lo = std::min(lo, s);
        hi = std::max(hi, s);
      }
      const double top_z = reg.centroid.z() + 0.5 * reg.transform.c;
      const auto px = project_point(reg.centroid, sc.camera, scan.ref_pose);
      const auto plan = grasp::plan_grasp(
          px ? Eigen::Vector2d(px->u, px->v) : Eigen::Vector2d::Zero(),
          reg.centroid.head<2>(), reg.yaw_deg,
          std::max(1e-3, sc.motion.height_m - top_z), hi - lo, sc.grasp.gripper);
      result.grasps.push_back(io::GraspRecordRow{static_cast<int>(ci), plan});

      const Pose true_pose = obj.pose();
      const auto [e_gp, e_gr] = evaluation::grasp_pose_error(grip_pose, true_pose);
      const Pose after = simulate_pick_disturbance(true_pose, e_gp, e_gr,
                                                   plan.feasible, sc.limits, pick_rng);
      row.metrics = evaluation::evaluate_grasp(grip_pose, true_pose, after, sc.limits);
      taken[obj_idx] = true;
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
      result.exit_code = 3;
    }
    result.rows.push_back(std::move(row));
  }

  if (write) {
    io::write_metrics_report(result.rows, out_dir / "metrics.csv");
    io::write_grasp_records(result.grasps, out_dir / "grasps.csv");
  }
  return result;
}

}  // namespace evg::pipeline
