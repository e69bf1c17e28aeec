#pragma once

#include "evgrasp/pointcloud/registration.hpp"

#include <cmath>

namespace evg::servoing {

enum class ServoPhase { Translate, Rotate, Aligned };

inline const char* to_string(ServoPhase p) {
  switch (p) {
    case ServoPhase::Translate: return "TRANSLATE";
    case ServoPhase::Rotate: return "ROTATE";
    case ServoPhase::Aligned: return "ALIGNED";
  }
  return "?";
}

/// State of the velocity-control servo loop: desired vs actual planar
/// centroid (pixels), desired vs actual orientation (degrees), the frozen
/// object depth used to convert pixel errors to meters, and the phase.
struct ServoState {
  Eigen::Vector2d desired_px = Eigen::Vector2d::Zero();
  Eigen::Vector2d actual_px = Eigen::Vector2d::Zero();
  double desired_theta_deg = 0.0;
  double actual_theta_deg = 0.0;
  double depth_m = 1.0;
  ServoPhase phase = ServoPhase::Translate;

  [[nodiscard]] Eigen::Vector2d position_error_px() const {
    return desired_px - actual_px;
  }
  [[nodiscard]] double angular_error_deg() const {
    return wrap_angle_90(desired_theta_deg - actual_theta_deg);
  }
};

struct ServoGains {
  double gain_p = 2.0;        // 1/s, translational
  double gain_r = 2.0;        // 1/s, rotational
  double v_max_mps = 0.25;    // planar speed clamp
  double v_r_max_dps = 30.0;  // rotational speed clamp
  double pos_tol_px = 3.0;
  double ang_tol_deg = 2.0;
  double focal_px = 320.0;    // pixel-to-meter conversion at depth
};

/// Planar + rotational velocity command. The planar vector (forward,
/// lateral) acts along the image x and y axes respectively.
struct VelocityCommand {
  double v_f = 0.0;  // m/s
  double v_l = 0.0;  // m/s
  double v_r = 0.0;  // deg/s

  [[nodiscard]] Eigen::Vector2d planar() const { return {v_f, v_l}; }
};

struct ServoStepResult {
  VelocityCommand command;
  ServoState state;
};

/// One proportional servo update. The translational phase converts the
/// pixel error to meters through the frozen depth and commands a clamped
/// planar camera velocity until the error is inside pos_tol_px; the
/// rotational phase then turns until ang_tol_deg; after both, the state
/// reports Aligned with a zero command.
///
/// Sign convention: commands are velocities of the eye-in-hand camera
/// along its own planar axes. Moving the camera toward the target shifts
/// the target's image point opposite the motion, so the command is the
/// negated pixel error scaled to meters.
inline ServoStepResult evs_step(const ServoState& state, const ServoGains& gains) {
  ServoStepResult r;
  r.state = state;

  if (r.state.phase == ServoPhase::Translate) {
    const Eigen::Vector2d e_px = r.state.position_error_px();
    if (e_px.norm() >= gains.pos_tol_px) {
      Eigen::Vector2d v =
          -gains.gain_p * e_px * (r.state.depth_m / gains.focal_px);
      const double vn = v.norm();
      if (vn > gains.v_max_mps) v *= gains.v_max_mps / vn;
      r.command.v_f = v.x();
      r.command.v_l = v.y();
      return r;
    }
    r.state.phase = ServoPhase::Rotate;
  }

  if (r.state.phase == ServoPhase::Rotate) {
    const double e_th = r.state.angular_error_deg();
    if (std::abs(e_th) >= gains.ang_tol_deg) {
      r.command.v_r =
          std::clamp(gains.gain_r * e_th, -gains.v_r_max_dps, gains.v_r_max_dps);
      return r;
    }
    r.state.phase = ServoPhase::Aligned;
  }
  return r;
}

/// Pre-grasp pose for the position-based path: the registered object
/// centroid raised by grasp_offset along world z, yaw aligned with the
/// object.
inline Pose pbvs_target(const ObjectRegistration& reg, double grasp_offset_m) {
  return Pose::planar(reg.centroid + Eigen::Vector3d(0.0, 0.0, grasp_offset_m),
                      reg.yaw_deg);
}

/// First-order kinematic plant: integrates velocity commands into the
/// servo measurement (planar pixels through the pinhole at the frozen
/// depth, rotation directly), optionally after a fixed command latency.
/// Camera motion +v shifts the target image by -v * f / Z; camera yaw adds
/// directly to the measured image angle.
class KinematicPlant {
 public:
  KinematicPlant(double focal_px, int latency_steps = 0)
      : focal_px_(focal_px), latency_(latency_steps) {}

  /// Advances the measured state by one step of dt_s under `cmd`.
  ServoState step(const ServoState& state, const VelocityCommand& cmd, double dt_s) {
    VelocityCommand effective = cmd;
    if (latency_ > 0) {
      queue_.push_back(cmd);
      if (static_cast<int>(queue_.size()) <= latency_) {
        effective = VelocityCommand{};
      } else {
        effective = queue_.front();
        queue_.erase(queue_.begin());
      }
    }
    ServoState next = state;
    next.actual_px -= effective.planar() * dt_s * (focal_px_ / state.depth_m);
    next.actual_theta_deg += effective.v_r * dt_s;
    next.phase = state.phase;
    return next;
  }

 private:
  double focal_px_;
  int latency_;
  std::vector<VelocityCommand> queue_;
};

}  // namespace evg::servoing
