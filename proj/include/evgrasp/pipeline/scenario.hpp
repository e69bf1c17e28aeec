#pragma once

#include "evgrasp/core/scene.hpp"
#include "evgrasp/core/types.hpp"
#include "evgrasp/evaluation/metrics.hpp"
#include "evgrasp/grasp/grasp.hpp"
#include "evgrasp/mems/mems.hpp"
#include "evgrasp/servoing/harris.hpp"
#include "evgrasp/servoing/servo.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>

namespace evg::pipeline {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PipelineKind { ModelBased, ModelFree };

/// Motion plan of the eye-in-hand camera: a linear scan for depth
/// exploration followed by a small slosh for segmentation, both at a fixed
/// height over the desk.
struct MotionSpec {
  double height_m = 1.0;
  Eigen::Vector2d scan_from = {-0.35, 0.0};
  Eigen::Vector2d scan_to = {0.35, 0.0};
  int scan_samples = 30;
  int64_t scan_duration_us = 800000;
  Eigen::Vector2d observe_center = {0.0, 0.0};
  double slosh_amplitude_m = 0.02;
  int slosh_samples = 9;
  int64_t slosh_duration_us = 120000;
  int64_t sim_dt_us = 5000;  // render step of the event simulator
};

struct NoiseSpec {
  double rate_hz = 0.0;  // background-activity injection ("low light")
  int64_t filter_window_us = 2000;
  int filter_radius = 1;
};

struct EmvsParams {
  double z_min = 0.3;
  double z_max = 1.5;
  int n_z = 64;
  double confidence_rel = 0.08;  // extraction floor, fraction of the peak vote
  double cluster_rel = 0.35;     // per-cluster keep fraction of its own peak
};

struct CloudParams {
  int outlier_k = 2;
  double outlier_max_dist = 0.08;
  double cluster_radius = 0.2;
  int cluster_min_points = 3;
  double condense_radius = 0.04;
};

struct ServoParams {
  servoing::ServoGains gains;
  double dt_s = 0.05;
  int max_steps = 400;
  int min_events_for_measurement = 25;
  int lost_after_steps = 30;  // dead-reckoned steps before the target counts as lost
};

struct GraspParams {
  grasp::GripperModel gripper;
  double grasp_offset_m = 0.25;  // pre-grasp height above the object centroid
};

struct Workspace {
  double x_min = -0.55, x_max = 0.55;
  double y_min = -0.45, y_max = 0.45;

  [[nodiscard]] bool contains(const Eigen::Vector3d& p) const {
    return p.x() >= x_min && p.x() <= x_max && p.y() >= y_min && p.y() <= y_max;
  }
};

struct Scenario {
  int schema_version = 1;
  uint64_t seed = 0;
  PipelineKind pipeline = PipelineKind::ModelFree;
  std::string name = "scenario";

  CameraModel camera = CameraModel::make(320.0, 173.0, 130.0, 346, 260, 0.5);
  Scene scene;
  MotionSpec motion;
  NoiseSpec noise;

  mems::MemsConfig mems;
  servoing::HarrisParams harris;
  EmvsParams emvs;
  CloudParams cloud;
  ServoParams servo;
  GraspParams grasp;
  evaluation::Limits limits;
  Workspace workspace;

  Scenario() {
    mems.sigma = 22.0;
    mems.alpha = 0.35;
    mems.beta = 2;
  }

  /// Closed scan loop: observe_center -> scan_from -> scan_to -> center at
  /// constant speed. Starting at the center makes the first pose (the
  /// frozen EMVS reference view) cover the whole workspace; covering each
  /// region in both travel directions cancels the first-order lag of the
  /// event-surface corner detections.
  [[nodiscard]] Trajectory scan_trajectory(int64_t t0_us = 0) const {
    const std::array<Eigen::Vector2d, 4> wp = {motion.observe_center,
                                               motion.scan_from, motion.scan_to,
                                               motion.observe_center};
    std::array<double, 3> len{};
    double total = 0.0;
    for (int leg = 0; leg < 3; ++leg) {
      len[leg] = (wp[leg + 1] - wp[leg]).norm();
      total += len[leg];
    }
    total = std::max(total, 1e-9);

    std::vector<Trajectory::Sample> samples;
    for (int i = 0; i < motion.scan_samples; ++i) {
      const double u = static_cast<double>(i) / (motion.scan_samples - 1);
      double s = u * total;
      Eigen::Vector2d xy = wp[0];
      for (int leg = 0; leg < 3; ++leg) {
        if (s <= len[leg] || leg == 2) {
          xy = wp[leg] + (len[leg] > 0 ? std::min(s / len[leg], 1.0) : 0.0) *
                             (wp[leg + 1] - wp[leg]);
          break;
        }
        s -= len[leg];
      }
      samples.push_back(
          {t0_us + static_cast<int64_t>(u * motion.scan_duration_us),
           down_pose(xy.x(), xy.y())});
    }
    return Trajectory(std::move(samples));
  }

  [[nodiscard]] Trajectory slosh_trajectory(int64_t t0_us) const {
    std::vector<Trajectory::Sample> samples;
    for (int i = 0; i < motion.slosh_samples; ++i) {
      const double u = static_cast<double>(i) / (motion.slosh_samples - 1);
      const double dx = motion.slosh_amplitude_m * std::sin(2.0 * EIGEN_PI * u);
      const double dy =
          0.5 * motion.slosh_amplitude_m * std::sin(4.0 * EIGEN_PI * u);
      samples.push_back(
          {t0_us + static_cast<int64_t>(u * motion.slosh_duration_us),
           down_pose(motion.observe_center.x() + dx, motion.observe_center.y() + dy)});
    }
    return Trajectory(std::move(samples));
  }

  /// Downward-looking camera pose at (x, y, height): image x along world
  /// x, image y along world -y, optical axis along -z.
  [[nodiscard]] Pose down_pose(double x, double y, double yaw_deg = 0.0) const {
    Pose p;
    p.R << 1, 0, 0, 0, -1, 0, 0, 0, -1;
    p.R = Eigen::AngleAxisd(deg2rad(yaw_deg), Eigen::Vector3d::UnitZ())
              .toRotationMatrix() *
          p.R;
    p.t = Eigen::Vector3d(x, y, motion.height_m);
    return p;
  }

  void validate() const {
    if (schema_version != 1)
      throw ScenarioError("unsupported schema_version " +
                          std::to_string(schema_version));
    camera.validate();
    scene.validate();
    mems.validate();
    harris.validate();
    grasp.gripper.validate();
    limits.validate();
    if (emvs.n_z < 2 || !(emvs.z_min > 0.0 && emvs.z_min < emvs.z_max))
      throw ScenarioError("invalid emvs depth range");
    if (motion.sim_dt_us <= 0) throw ScenarioError("sim_dt_us must be > 0");
  }
};

namespace detail {

using nlohmann::json;

inline Eigen::Vector2d vec2(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ScenarioError("expected [x, y] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline void parse_scene(const json& j, Scene& scene) {
  scene.background_log_intensity =
      j.value("background_log_intensity", scene.background_log_intensity);
  if (!j.contains("objects")) return;
  scene.objects.clear();
  for (const auto& jo : j.at("objects")) {
    SceneObject o;
    const auto& dims = jo.at("dims");
    if (!dims.is_array() || dims.size() != 3)
      throw ScenarioError("object dims must be [dx, dy, dz]");
    o.dims = Eigen::Vector3d(dims[0].get<double>(), dims[1].get<double>(),
                             dims[2].get<double>());
    const auto& c = jo.at("center");
    if (c.is_array() && c.size() == 3)
      o.center = Eigen::Vector3d(c[0].get<double>(), c[1].get<double>(),
                                 c[2].get<double>());
    else if (c.is_array() && c.size() == 2)
      o.center = Eigen::Vector3d(c[0].get<double>(), c[1].get<double>(),
                                 o.dims.z() / 2.0);  // resting on the desk
    else
      throw ScenarioError("object center must be [x, y] or [x, y, z]");
    o.yaw_deg = jo.value("yaw_deg", 0.0);
    o.log_intensity = jo.value("log_intensity", 1.0);
    scene.objects.push_back(o);
  }
}

}  // namespace detail

inline Scenario parse_scenario(const nlohmann::json& j) {
  Scenario s;
  s.schema_version = j.value("schema_version", 1);
  if (!j.contains("seed")) throw ScenarioError("scenario requires a seed");
  s.seed = j.at("seed").get<uint64_t>();
  s.name = j.value("name", s.name);

  const std::string kind = j.value("pipeline", "model_free");
  if (kind == "model_based")
    s.pipeline = PipelineKind::ModelBased;
  else if (kind == "model_free")
    s.pipeline = PipelineKind::ModelFree;
  else
    throw ScenarioError("pipeline must be model_based or model_free");

  if (j.contains("camera")) {
    const auto& jc = j.at("camera");
    s.camera = CameraModel::make(
        jc.value("f", 320.0), jc.value("cx", 173.0), jc.value("cy", 130.0),
        jc.value("width", 346), jc.value("height", 260),
        jc.value("contrast_threshold", 0.5));
  }
  if (j.contains("scene")) detail::parse_scene(j.at("scene"), s.scene);

  if (j.contains("motion")) {
    const auto& jm = j.at("motion");
    auto& m = s.motion;
    m.height_m = jm.value("height_m", m.height_m);
    if (jm.contains("scan_from")) m.scan_from = detail::vec2(jm.at("scan_from"));
    if (jm.contains("scan_to")) m.scan_to = detail::vec2(jm.at("scan_to"));
    m.scan_samples = jm.value("scan_samples", m.scan_samples);
    m.scan_duration_us = jm.value("scan_duration_us", m.scan_duration_us);
    if (jm.contains("observe_center"))
      m.observe_center = detail::vec2(jm.at("observe_center"));
    m.slosh_amplitude_m = jm.value("slosh_amplitude_m", m.slosh_amplitude_m);
    m.slosh_samples = jm.value("slosh_samples", m.slosh_samples);
    m.slosh_duration_us = jm.value("slosh_duration_us", m.slosh_duration_us);
    m.sim_dt_us = jm.value("sim_dt_us", m.sim_dt_us);
  }
  if (j.contains("noise")) {
    const auto& jn = j.at("noise");
    s.noise.rate_hz = jn.value("rate_hz", s.noise.rate_hz);
    s.noise.filter_window_us = jn.value("filter_window_us", s.noise.filter_window_us);
    s.noise.filter_radius = jn.value("filter_radius", s.noise.filter_radius);
  }
  if (j.contains("mems")) {
    const auto& jm = j.at("mems");
    s.mems.sigma = jm.value("sigma", s.mems.sigma);
    s.mems.alpha = jm.value("alpha", s.mems.alpha);
    s.mems.beta = jm.value("beta", s.mems.beta);
    s.mems.time_scale = jm.value("time_scale", s.mems.time_scale);
    s.mems.convergence_eps = jm.value("convergence_eps", s.mems.convergence_eps);
    s.mems.max_iters = jm.value("max_iters", s.mems.max_iters);
    s.mems.mode_merge_radius = jm.value("mode_merge_radius", s.mems.mode_merge_radius);
    s.mems.min_cluster_fraction =
        jm.value("min_cluster_fraction", s.mems.min_cluster_fraction);
  }
  if (j.contains("harris")) {
    const auto& jh = j.at("harris");
    s.harris.window_us = jh.value("window_us", s.harris.window_us);
    s.harris.patch = jh.value("patch", s.harris.patch);
    s.harris.k = jh.value("k", s.harris.k);
    s.harris.threshold = jh.value("threshold", s.harris.threshold);
  }
  if (j.contains("emvs")) {
    const auto& je = j.at("emvs");
    s.emvs.z_min = je.value("z_min", s.emvs.z_min);
    s.emvs.z_max = je.value("z_max", s.emvs.z_max);
    s.emvs.n_z = je.value("n_z", s.emvs.n_z);
    s.emvs.confidence_rel = je.value("confidence_rel", s.emvs.confidence_rel);
    s.emvs.cluster_rel = je.value("cluster_rel", s.emvs.cluster_rel);
  }
  if (j.contains("cloud")) {
    const auto& jc = j.at("cloud");
    s.cloud.outlier_k = jc.value("outlier_k", s.cloud.outlier_k);
    s.cloud.outlier_max_dist = jc.value("outlier_max_dist", s.cloud.outlier_max_dist);
    s.cloud.cluster_radius = jc.value("cluster_radius", s.cloud.cluster_radius);
    s.cloud.cluster_min_points =
        jc.value("cluster_min_points", s.cloud.cluster_min_points);
    s.cloud.condense_radius = jc.value("condense_radius", s.cloud.condense_radius);
  }
  if (j.contains("servo")) {
    const auto& js = j.at("servo");
    s.servo.gains.gain_p = js.value("gain_p", s.servo.gains.gain_p);
    s.servo.gains.gain_r = js.value("gain_r", s.servo.gains.gain_r);
    s.servo.gains.v_max_mps = js.value("v_max_mps", s.servo.gains.v_max_mps);
    s.servo.gains.v_r_max_dps = js.value("v_r_max_dps", s.servo.gains.v_r_max_dps);
    s.servo.gains.pos_tol_px = js.value("pos_tol_px", s.servo.gains.pos_tol_px);
    s.servo.gains.ang_tol_deg = js.value("ang_tol_deg", s.servo.gains.ang_tol_deg);
    s.servo.dt_s = js.value("dt_s", s.servo.dt_s);
    s.servo.max_steps = js.value("max_steps", s.servo.max_steps);
    s.servo.min_events_for_measurement =
        js.value("min_events_for_measurement", s.servo.min_events_for_measurement);
    s.servo.lost_after_steps = js.value("lost_after_steps", s.servo.lost_after_steps);
  }
  if (j.contains("grasp")) {
    const auto& jg = j.at("grasp");
    s.grasp.gripper.finger_span = jg.value("finger_span", s.grasp.gripper.finger_span);
    s.grasp.gripper.min_span = jg.value("min_span", s.grasp.gripper.min_span);
    s.grasp.grasp_offset_m = jg.value("grasp_offset_m", s.grasp.grasp_offset_m);
  }
  if (j.contains("limits")) {
    const auto& jl = j.at("limits");
    s.limits.l_p_cm = jl.value("l_p_cm", s.limits.l_p_cm);
    s.limits.l_r_deg = jl.value("l_r_deg", s.limits.l_r_deg);
  }
  if (j.contains("workspace")) {
    const auto& jw = j.at("workspace");
    s.workspace.x_min = jw.value("x_min", s.workspace.x_min);
    s.workspace.x_max = jw.value("x_max", s.workspace.x_max);
    s.workspace.y_min = jw.value("y_min", s.workspace.y_min);
    s.workspace.y_max = jw.value("y_max", s.workspace.y_max);
  }

  // The servo converts pixels to meters through the same camera.
  s.servo.gains.focal_px = s.camera.fx();
  s.validate();
  return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ScenarioError("cannot open scenario " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError("scenario parse error: " + std::string(e.what()));
  }
  return parse_scenario(j);
}

/// Applies one `section.key=value` override onto the raw scenario JSON.
inline void apply_override(nlohmann::json& j, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos)
    throw ScenarioError("override must be key=value: " + spec);
  const std::string path = spec.substr(0, eq);
  const std::string value = spec.substr(eq + 1);

  nlohmann::json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw ScenarioError("bad override path: " + spec);
    if (dot == std::string::npos) {
      nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
      (*node)[key] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

}  // namespace evg::pipeline
