#pragma once

#include "evgrasp/core/noise_filter.hpp"
#include "evgrasp/core/simulator.hpp"
#include "evgrasp/emvs/emvs.hpp"
#include "evgrasp/io/formats.hpp"
#include "evgrasp/pipeline/scenario.hpp"

#include <filesystem>
#include <random>

namespace evg::pipeline {

/// Stable per-stage seed derivation (splitmix64 step over base ^ salt).
inline uint64_t derive_seed(uint64_t base, uint64_t salt) {
  uint64_t z = base ^ (salt * 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct PipelineResult {
  std::vector<io::MetricsRow> rows;
  std::vector<io::GraspRecordRow> grasps;
  int exit_code = 0;  // 0 ok, 3 when any object failed

  [[nodiscard]] double success_rate() const {
    if (rows.empty()) return 0.0;
    int ss = 0;
    for (const auto& r : rows) ss += r.failed ? 0 : r.metrics.ss;
    return static_cast<double>(ss) / static_cast<double>(rows.size());
  }
};

/// Scan-phase products shared by both pipelines: the (optionally denoised)
/// event stream, its corner events, and the frozen reconstruction.
struct ScanReconstruction {
  EventStream events;
  EventStream corners;
  emvs::DepthMap depth_map;
  PointCloud cloud;
  Pose ref_pose;
  uint32_t confidence_threshold = 1;
};

/// Runs simulate -> (inject + filter) -> corner detection -> DSI -> depth
/// map -> cloud over the scan trajectory, writing each artifact as it is
/// produced. `out_dir` may be empty to skip artifacts.
inline ScanReconstruction run_scan(const Scenario& sc,
                                   const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  const bool write = !out_dir.empty();
  if (write) fs::create_directories(out_dir);

  const Trajectory traj = sc.scan_trajectory();
  LabeledEventStream labeled =
      generate_labeled_events(sc.scene, traj, sc.camera, sc.motion.sim_dt_us,
                              derive_seed(sc.seed, 1));
  ScanReconstruction out;
  if (sc.noise.rate_hz > 0.0) {
    labeled = inject_noise(labeled, sc.noise.rate_hz, derive_seed(sc.seed, 2));
    out.events = filter_noise(labeled.stream, sc.noise.filter_window_us,
                              sc.noise.filter_radius);
  } else {
    out.events = labeled.stream;
  }
  if (write) write_events(out.events, out_dir / "scan_events.csv");

  out.corners = servoing::harris_corner_events(out.events, sc.harris);
  if (write) write_events(out.corners, out_dir / "scan_corners.csv");

  const auto dsi = emvs::build_dsi(out.corners, traj, sc.camera, sc.emvs.z_min,
                                   sc.emvs.z_max, static_cast<std::size_t>(sc.emvs.n_z));
  out.ref_pose = dsi.ref_pose;

  uint32_t max_vote = 0;
  for (uint32_t v : dsi.scores) max_vote = std::max(max_vote, v);
  out.confidence_threshold = std::max<uint32_t>(
      1, static_cast<uint32_t>(std::lround(sc.emvs.confidence_rel * max_vote)));
  out.depth_map = emvs::extract_depth(dsi, out.confidence_threshold);
  if (write) io::write_depth_map(out.depth_map, out_dir / "depth_map.csv");

  out.cloud = emvs::to_point_cloud(out.depth_map, sc.camera, out.ref_pose);
  if (write) io::write_point_cloud(out.cloud, out_dir / "cloud.csv");
  return out;
}

/// Index of the true scene object nearest to a planar position, with its
/// distance; used only by the evaluation side of the simulation.
inline std::pair<int, double> nearest_object(const Scene& scene,
                                             const Eigen::Vector2d& planar,
                                             const std::vector<bool>& taken) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    if (taken[i]) continue;
    const double d = (scene.objects[i].center.head<2>() - planar).norm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return {best, best_d};
}

/// Deterministic pick disturbance: a fraction of the alignment error drags
/// the object, plus a small seeded settling jitter. Infeasible grasps
/// displace the object beyond the deviation limits.
inline Pose simulate_pick_disturbance(const Pose& before, double e_gp_cm,
                                      double e_gr_deg, bool feasible,
                                      const evaluation::Limits& lim,
                                      std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double d_p_cm = 0.35 * e_gp_cm + 0.05 + 0.20 * u01(rng);
  double d_r_deg = 0.40 * e_gr_deg + 0.10 + 0.80 * u01(rng);
  if (!feasible) {
    d_p_cm = 2.5 * lim.l_p_cm;
    d_r_deg = 1.5 * lim.l_r_deg;
  }
  const double dir = 2.0 * EIGEN_PI * u01(rng);
  const double spin = u01(rng) < 0.5 ? -1.0 : 1.0;
  Pose after = before;
  after.t += 0.01 * d_p_cm * Eigen::Vector3d(std::cos(dir), std::sin(dir), 0.0);
  after.R = Eigen::AngleAxisd(deg2rad(spin * d_r_deg), Eigen::Vector3d::UnitZ())
                .toRotationMatrix() *
            after.R;
  return after;
}

/// Events produced by moving the camera from `from` to `to` over one servo
/// step. Timestamps continue at t0; noise injection and filtering follow
/// the scenario's noise spec.
inline EventStream simulate_motion_events(const Scenario& sc, const Scene& scene,
                                          const Pose& from, const Pose& to,
                                          int64_t t0_us, int64_t dt_us,
                                          uint64_t seed) {
  std::vector<Trajectory::Sample> samples = {{t0_us, from}, {t0_us + dt_us, to}};
  const Trajectory leg(std::move(samples));
  LabeledEventStream labeled =
      generate_labeled_events(scene, leg, sc.camera, dt_us, seed);
  if (sc.noise.rate_hz > 0.0) {
    labeled = inject_noise(labeled, sc.noise.rate_hz, derive_seed(seed, 3));
    return filter_noise(labeled.stream, sc.noise.filter_window_us,
                        sc.noise.filter_radius);
  }
  return labeled.stream;
}

}  // namespace evg::pipeline
