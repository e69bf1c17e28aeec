#pragma once

#include "evgrasp/pipeline/common.hpp"
#include "evgrasp/servoing/surfaces.hpp"

namespace evg::pipeline {

namespace detail {

struct ServoOutcome {
  bool aligned = false;
  bool lost = false;
  Pose final_pose;
  Eigen::Vector2d final_px = Eigen::Vector2d::Zero();
  grasp::OrientationHistogram orientation_samples;  // world-frame object yaw
  EventStream last_target_events;  // masked events of the last measurement
  std::vector<io::ServoTraceRow> trace;
};

/// Camera pose advanced by one velocity command: planar motion along the
/// camera's own axes, yaw about the world vertical through the camera.
inline Pose integrate_pose(const Pose& pose, const servoing::VelocityCommand& cmd,
                           double dt_s) {
  Pose next = pose;
  next.t += pose.R * Eigen::Vector3d(cmd.v_f, cmd.v_l, 0.0) * dt_s;
  next.R = Eigen::AngleAxisd(deg2rad(cmd.v_r * dt_s), Eigen::Vector3d::UnitZ())
               .toRotationMatrix() *
           next.R;
  return next;
}

/// One servo run toward a target whose initial image position and angle
/// come from the observation-phase segmentation. Measurements come from
/// the events the camera's own motion generates; steps without enough
/// events dead-reckon through the kinematic model.
inline ServoOutcome servo_to_object(const Scenario& sc, const Scene& live,
                                    const Pose& start_pose,
                                    const Eigen::Vector2d& initial_px,
                                    double initial_theta_img_deg, double depth_m,
                                    int64_t& t_cursor_us, uint64_t seed) {
  using servoing::ServoPhase;
  ServoOutcome out;
  Pose pose = start_pose;

  servoing::ServoState state;
  state.desired_px = Eigen::Vector2d(sc.camera.cx(), sc.camera.cy());
  state.actual_px = initial_px;
  state.desired_theta_deg = 0.0;
  state.actual_theta_deg = initial_theta_img_deg;
  state.depth_m = depth_m;

  servoing::ServoGains gains = sc.servo.gains;
  gains.focal_px = sc.camera.fx();

  mems::MemsConfig step_mems = sc.mems;
  step_mems.beta = 1;  // per-step windows are small

  const int64_t dt_us = static_cast<int64_t>(sc.servo.dt_s * 1e6);
  int dead_steps = 0;

  for (int step = 0; step < sc.servo.max_steps; ++step) {
    const auto r = servoing::evs_step(state, gains);
    state.phase = r.state.phase;

    io::ServoTraceRow row;
    row.step = step;
    row.t_us = t_cursor_us;
    row.phase = r.state.phase;
    row.e_px = r.state.position_error_px();
    row.e_theta_deg = r.state.angular_error_deg();
    row.cmd = r.command;
    out.trace.push_back(row);

    if (r.state.phase == ServoPhase::Aligned) {
      out.aligned = true;
      break;
    }

    const Pose next_pose = integrate_pose(pose, r.command, sc.servo.dt_s);
    const EventStream step_events = simulate_motion_events(
        sc, live, pose, next_pose, t_cursor_us, dt_us, derive_seed(seed, 100 + step));
    t_cursor_us += dt_us;
    pose = next_pose;

    // Dead-reckoned update; overwritten below when the window measures.
    state.actual_px -=
        r.command.planar() * sc.servo.dt_s * (gains.focal_px / state.depth_m);
    state.actual_theta_deg += r.command.v_r * sc.servo.dt_s;

    bool measured = false;
    if (static_cast<int>(step_events.events.size()) >=
        sc.servo.min_events_for_measurement) {
      try {
        const auto step_clusters = mems::segment(step_events, step_mems, seed);
        int best = -1;
        double best_d = 40.0;  // px; beyond this the window shows another object
        for (std::size_t c = 0; c < step_clusters.num_clusters(); ++c) {
          const double d = (step_clusters.centroids[c] - state.actual_px).norm();
          if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
          }
        }
        if (best >= 0) {
          const EventStream safe =
              servoing::harris_corner_events(step_events, sc.harris);
          const EventStream sale =
              servoing::mask_to_object(safe, step_clusters, step_events, best);
          if (const auto save = servoing::robust_centroid(sale)) {
            state.actual_px = *save;
            measured = true;
          }
          // Image-plane orientation of the target's events this step.
          std::vector<Eigen::Vector2d> planar;
          for (std::size_t j = 0; j < step_clusters.labels.size(); ++j)
            if (step_clusters.labels[j] == best) {
              const Event& e =
                  step_events.events[step_clusters.retained_indices[j]];
              planar.emplace_back(e.x, e.y);
            }
          try {
            const double theta_img = grasp::principal_axis_deg(planar);
            state.actual_theta_deg = theta_img;
            out.orientation_samples.add(pose.yaw_deg() - theta_img);
            out.last_target_events.width = step_events.width;
            out.last_target_events.height = step_events.height;
            out.last_target_events.events.clear();
            for (const auto& p : planar)
              out.last_target_events.events.push_back(
                  Event{static_cast<int>(p.x()), static_cast<int>(p.y()), 0, 1});
          } catch (const std::exception&) {
          }
        }
      } catch (const std::exception&) {
      }
    }

    dead_steps = measured ? 0 : dead_steps + 1;
    const bool error_large =
        r.state.position_error_px().norm() > 4.0 * gains.pos_tol_px;
    if (dead_steps > sc.servo.lost_after_steps && error_large) {
      out.lost = true;
      break;
    }
  }

  out.final_pose = pose;
  out.final_px = state.actual_px;
  return out;
}

}  // namespace detail

/// Purely event-based multi-object grasping: one-time depth exploration
/// (frozen depth map), spatio-temporal segmentation of the observation
/// slosh, then a per-object velocity servo loop, grasp plan and pick.
/// Objects are grasped in descending cluster size; a lost target retries
/// once from the start pose before the object is recorded as failed.
inline PipelineResult run_model_free(const Scenario& sc,
                                     const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  const bool write = !out_dir.empty();
  if (write) fs::create_directories(out_dir);

  PipelineResult result;

  // One-time EMVS; the depth map stays frozen for the whole run.
  const ScanReconstruction scan = run_scan(sc, out_dir);
  int64_t t_cursor = sc.motion.scan_duration_us + 10000;

  // Observation slosh and segmentation.
  const Trajectory slosh = sc.slosh_trajectory(t_cursor);
  LabeledEventStream slosh_labeled = generate_labeled_events(
      sc.scene, slosh, sc.camera, sc.motion.sim_dt_us, derive_seed(sc.seed, 4));
  EventStream slosh_events;
  if (sc.noise.rate_hz > 0.0) {
    slosh_labeled =
        inject_noise(slosh_labeled, sc.noise.rate_hz, derive_seed(sc.seed, 5));
    slosh_events = filter_noise(slosh_labeled.stream, sc.noise.filter_window_us,
                                sc.noise.filter_radius);
  } else {
    slosh_events = slosh_labeled.stream;
  }
  t_cursor += sc.motion.slosh_duration_us + 10000;
  if (write) write_events(slosh_events, out_dir / "slosh_events.csv");

  if (slosh_events.empty()) {
    if (write) {
      io::write_metrics_report(result.rows, out_dir / "metrics.csv");
      io::write_grasp_records(result.grasps, out_dir / "grasps.csv");
    }
    return result;  // empty scene: nothing to grasp
  }

  const mems::ClusterSet clusters =
      mems::segment(slosh_events, sc.mems, derive_seed(sc.seed, 6));
  if (write) io::write_clusters(clusters, out_dir / "clusters.csv");

  const Pose observe_pose =
      sc.down_pose(sc.motion.observe_center.x(), sc.motion.observe_center.y());

  // Per-cluster frozen depth: median height of reconstruction points that
  // project into the cluster's footprint.
  std::vector<std::vector<Eigen::Vector2d>> member_px(clusters.num_clusters());
  for (std::size_t j = 0; j < clusters.labels.size(); ++j)
    if (clusters.labels[j] >= 0) {
      const Event& e = slosh_events.events[clusters.retained_indices[j]];
      member_px[clusters.labels[j]].emplace_back(e.x, e.y);
    }
  auto cluster_depth = [&](std::size_t c) {
    std::vector<double> tops;
    for (const auto& p : scan.cloud) {
      const auto px = project_point(p, sc.camera, observe_pose);
      if (!px) continue;
      for (const auto& m : member_px[c])
        if ((Eigen::Vector2d(px->u, px->v) - m).squaredNorm() <= 36.0) {
          tops.push_back(p.z());
          break;
        }
    }
    if (tops.empty()) return sc.motion.height_m * 0.85;
    std::nth_element(tops.begin(), tops.begin() + tops.size() / 2, tops.end());
    return sc.motion.height_m - tops[tops.size() / 2];
  };

  std::vector<bool> taken(sc.scene.objects.size(), false);
  std::mt19937_64 pick_rng(derive_seed(sc.seed, 11));

  for (std::size_t ci = 0; ci < clusters.num_clusters(); ++ci) {
    io::MetricsRow row;
    row.scenario = sc.name;
    row.object_id = static_cast<int>(ci);
    try {
      // Live scene without the already-picked objects.
      Scene live;
      live.background_log_intensity = sc.scene.background_log_intensity;
      for (std::size_t i = 0; i < sc.scene.objects.size(); ++i)
        if (!taken[i]) live.objects.push_back(sc.scene.objects[i]);
      if (live.objects.empty()) throw std::runtime_error("no objects left in scene");

      const double depth0 = cluster_depth(ci);
      double theta0 = 0.0;
      try {
        theta0 = grasp::principal_axis_deg(member_px[ci]);
      } catch (const std::exception&) {
      }

      detail::ServoOutcome outcome;
      for (int attempt = 0; attempt < 2; ++attempt) {
        outcome = detail::servo_to_object(sc, live, observe_pose,
                                          clusters.centroids[ci], theta0, depth0,
                                          t_cursor, derive_seed(sc.seed, 20 + ci * 2 + attempt));
        if (outcome.aligned) break;
        if (!outcome.lost) break;  // ran out of steps: do not retry
      }
      if (write)
        io::write_servo_trace(outcome.trace,
                              out_dir / ("servo_trace_" + std::to_string(ci) + ".csv"));
      if (!outcome.aligned)
        throw std::runtime_error(outcome.lost ? "target lost during servoing"
                                              : "servo did not converge");

      const double theta_star = outcome.orientation_samples.total() > 0
                                    ? outcome.orientation_samples.mode_deg()
                                    : theta0;

      // Aperture check: in the aligned view the rotate phase has put the
      // object's long axis along image x, so the fingers close across the
      // vertical pixel extent, scaled to meters at the frozen depth.
      double lo_y = 1e18, hi_y = -1e18;
      if (!outcome.last_target_events.events.empty()) {
        for (const Event& e : outcome.last_target_events.events) {
          lo_y = std::min(lo_y, static_cast<double>(e.y));
          hi_y = std::max(hi_y, static_cast<double>(e.y));
        }
      } else {
        for (const auto& m : member_px[ci]) {
          lo_y = std::min(lo_y, m.y());
          hi_y = std::max(hi_y, m.y());
        }
      }
      const double extent_m = (hi_y - lo_y) * depth0 / sc.camera.fy();

      const auto plan = grasp::plan_grasp(
          outcome.final_px, outcome.final_pose.t.head<2>(), theta_star, depth0,
          extent_m, sc.grasp.gripper);
      result.grasps.push_back(io::GraspRecordRow{static_cast<int>(ci), plan});

      const Pose grip_pose = Pose::planar(
          Eigen::Vector3d(outcome.final_pose.t.x(), outcome.final_pose.t.y(),
                          sc.motion.height_m - depth0),
          outcome.final_pose.yaw_deg());
      if (!sc.workspace.contains(grip_pose.t))
        throw std::runtime_error("grasp target outside the workspace");

      const auto [obj_idx, obj_dist] =
          nearest_object(sc.scene, grip_pose.t.head<2>(), taken);
      if (obj_idx < 0 || obj_dist > 0.15)
        throw std::runtime_error("aligned pose matches no remaining object");
      const SceneObject& obj = sc.scene.objects[obj_idx];

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
